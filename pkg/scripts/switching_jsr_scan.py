"""Worst-case growth of the linearized converter under switched slopes.

Linearizes the cycle map (current plus voltage) around the operating point
for each slope in {-a, +a} and bounds the joint spectral radius from below
by the largest normalized spectral radius over all products up to length
``--depth``. A value of one or more exhibits a destabilizing periodic slope
sequence; values below one mean none of length ``--depth`` or less exists.

    python3 scripts/switching_jsr_scan.py --R 0.4 --a 0.48
"""

import argparse
import itertools

import numpy as np

from cyclecert.converter import compute_equilibrium, table1_buck
from cyclecert.voltage import ltv_coefficients


def linearized_map(params, s):
    """Jacobian of (i, v) -> (i+, v+) with the slope schedule at slope s."""
    eq = compute_equilibrium(params)
    L, T_on, V, T = params.L, params.t_fixed, params.v_out, eq.t_var_ss
    m2 = V / L
    # off-time deviation solves i - v T_on/L - m2 dt - v T/L = -s m2 dt
    dt_di = 1.0 / ((1 + s) * m2)
    dt_dv = -(T_on + T) / L / ((1 + s) * m2)
    di_di = 1.0 - m2 * dt_di
    di_dv = -(T_on + T) / L - m2 * dt_dv
    co = ltv_coefficients(params, T)
    return np.array([
        [di_di, di_dv],
        [co.beta_n + co.gamma_n * di_di, co.alpha_n + co.gamma_n * di_dv],
    ])


def jsr_lower_bound(mats, depth):
    best = max(max(abs(np.linalg.eigvals(m))) for m in mats)
    for k in range(2, depth + 1):
        for word in itertools.product(mats, repeat=k):
            prod = np.linalg.multi_dot(word)
            best = max(best, max(abs(np.linalg.eigvals(prod))) ** (1.0 / k))
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--R", type=float, nargs="+", default=[0.4, 0.05])
    ap.add_argument("--a", type=float, nargs="+", default=[0.3, 0.44, 0.48])
    ap.add_argument("--depth", type=int, default=10)
    args = ap.parse_args()
    print("R,a,jsr_lower_bound")
    for R in args.R:
        p = table1_buck(R)
        for a in args.a:
            mats = [linearized_map(p, -a), linearized_map(p, a)]
            print(f"{R},{a},{jsr_lower_bound(mats, args.depth):.6f}")


if __name__ == "__main__":
    main()
