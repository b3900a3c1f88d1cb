"""Dissipativity LMI for Lur'e systems and the current-block gain g(alpha, beta).

The gain certificate is found without an SDP solver: bisection on gamma^2
around a feasibility search over the scalar storage weight P and the
S-procedure multiplier lambda. Every returned certificate is re-verified by
an eigenvalue test of the assembled matrix, so soundness never depends on
the search path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .converter import ConverterParams, compute_equilibrium


class InfeasibleError(RuntimeError):
    """No gamma below the ceiling admits LMI witnesses."""


def _as2d(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class LftSystem:
    """State-space data of an upper LFT F_u(L, Delta).

    ``h`` is the nonlinearity output, ``r`` the exogenous input, ``p`` the
    nonlinearity input and ``e`` the performance output.
    """

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    D11: np.ndarray
    D12: np.ndarray
    C2: np.ndarray
    D21: np.ndarray
    D22: np.ndarray

    def __post_init__(self):
        for name in ("A", "B1", "B2", "C1", "D11", "D12", "C2", "D21", "D22"):
            object.__setattr__(self, name, _as2d(getattr(self, name)))
        n = self.A.shape[0]
        m = self.B1.shape[1]
        k = self.B2.shape[1]
        q = self.C1.shape[0]
        ne = self.C2.shape[0]
        expected = {
            "A": (n, n), "B1": (n, m), "B2": (n, k),
            "C1": (q, n), "D11": (q, m), "D12": (q, k),
            "C2": (ne, n), "D21": (ne, m), "D22": (ne, k),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if q != m:
            raise ValueError("nonlinearity input and output must have equal dimension")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_delta(self) -> int:
        return self.B1.shape[1]

    @property
    def n_inputs(self) -> int:
        return self.B2.shape[1]

    def is_well_posed(self, slope: float) -> bool:
        """True if h = slope * (C1 x + D11 h + D12 r) has a unique solution."""
        M = np.eye(self.n_delta) - slope * self.D11
        return abs(np.linalg.det(M)) > 1e-12


@dataclass(frozen=True)
class SectorBound:
    alpha_hat: float
    beta_hat: float

    def __post_init__(self):
        if not self.alpha_hat <= 0.0 <= self.beta_hat:
            raise ValueError(
                f"sector [{self.alpha_hat}, {self.beta_hat}] must contain zero"
            )
        if not self.alpha_hat > -1.0:
            raise ValueError("alpha_hat must exceed -1 for a well-posed current loop")

    @classmethod
    def symmetric(cls, a: float) -> "SectorBound":
        return cls(-abs(a), abs(a))

    @property
    def width(self) -> float:
        return self.beta_hat - self.alpha_hat


@dataclass(frozen=True)
class GainCertificate:
    gamma_hat: float
    P: np.ndarray
    lambda_mult: float
    bisection_tolerance: float
    sector: Optional[SectorBound] = None

    @property
    def P_scalar(self) -> float:
        return float(np.asarray(self.P).reshape(-1)[0])


@dataclass
class GainSurface:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray  # shape (len(alpha), len(beta)); inf marks infeasible cells
    tolerance: float

    def rows(self):
        for i, a in enumerate(self.alpha):
            for j, b in enumerate(self.beta):
                yield float(a), float(b), float(self.gamma[i, j])

    def to_csv(self) -> str:
        lines = ["alpha_hat,beta_hat,gamma_hat"]
        for a, b, g in self.rows():
            lines.append(",".join(_fmt(v) for v in (a, b, g)))
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.10e}"


def unitless_current_block() -> LftSystem:
    """Current block with the one-cycle delay as its only state.

    x[n+1] = h[n],  p[n] = x[n] - h[n] + r[n],  e[n] = x[n],  h = Delta(p).
    """
    return LftSystem(
        A=0.0, B1=1.0, B2=0.0,
        C1=1.0, D11=-1.0, D12=1.0,
        C2=1.0, D21=0.0, D22=0.0,
    )


def _sector_middle(sector: SectorBound, k: int) -> np.ndarray:
    a, b = sector.alpha_hat, sector.beta_hat
    I = np.eye(k)
    return np.block([[-a * b * I, 0.5 * (a + b) * I], [0.5 * (a + b) * I, -I]])


def _lmi_basis(sys: LftSystem, sector: SectorBound):
    """Matrices (M0, Mlam, Mgam) with M = M0 + Lyapunov(P) + lam*Mlam - gamma^2*Mgam."""
    n, m, k = sys.n_states, sys.n_delta, sys.n_inputs
    N = np.block([[sys.C1, sys.D11, sys.D12], [np.zeros((m, n)), np.eye(m), np.zeros((m, k))]])
    Mlam = N.T @ _sector_middle(sector, m) @ N
    CD = np.hstack([sys.C2, sys.D21, sys.D22])
    M0 = CD.T @ CD
    Mgam = np.zeros_like(M0)
    Mgam[n + m:, n + m:] = np.eye(k)
    return M0, Mlam, Mgam


def _lyapunov_part(sys: LftSystem, P: np.ndarray) -> np.ndarray:
    n = sys.n_states
    AB = np.hstack([sys.A, sys.B1, sys.B2])
    L = AB.T @ P @ AB
    L[:n, :n] -= P
    return L


def build_theorem1_matrix(sys: LftSystem, sector: SectorBound, P, lambda_mult: float, gamma_sq: float) -> np.ndarray:
    """Assemble the three-block dissipativity matrix.

    Lyapunov block [A B1 B2]' P [A B1 B2] - diag(P, 0, gamma^2 I), plus
    lambda times the sector block, plus the performance block
    [C2 D21 D22]' [C2 D21 D22]. Variable ordering is (x, h, r).
    """
    P = _as2d(P)
    if P.shape != (sys.n_states, sys.n_states):
        raise ValueError(f"P must be {sys.n_states}x{sys.n_states}")
    if not np.allclose(P, P.T):
        raise ValueError("P must be symmetric")
    if lambda_mult < 0:
        raise ValueError("lambda_mult must be nonnegative")
    if not gamma_sq > 0:
        raise ValueError("gamma_sq must be positive")
    M0, Mlam, Mgam = _lmi_basis(sys, sector)
    M = _lyapunov_part(sys, P) + lambda_mult * Mlam + M0 - gamma_sq * Mgam
    return 0.5 * (M + M.T)


def default_margin(M: np.ndarray) -> float:
    return 1e-10 * (1.0 + float(np.max(np.abs(M))))


def is_negative_definite(M, margin: float = 0.0) -> bool:
    """Strict test: every eigenvalue of M lies below ``-margin``."""
    M = _as2d(M)
    if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, rtol=1e-12, atol=1e-14):
        raise ValueError("matrix must be square and symmetric")
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    return bool(np.linalg.eigvalsh(M)[-1] < -margin)


class _Found(Exception):
    def __init__(self, witness):
        self.witness = witness


class _FeasibilitySearch:
    """Search over (P, lambda) for a scalar-state system at fixed gamma^2."""

    def __init__(self, sys: LftSystem, sector: SectorBound, margin_rel: float = 1e-10):
        if sys.n_states != 1:
            raise ValueError("certify_gain supports scalar-state systems only")
        self.sys = sys
        self.sector = sector
        self.margin_rel = margin_rel
        M0, self.Mlam, self.Mgam = _lmi_basis(sys, sector)
        self.MP = _lyapunov_part(sys, np.eye(1))
        self.M0 = M0
        logs = np.linspace(-3.0, 7.0, 31)
        Pg, Lg = np.meshgrid(10.0 ** logs, np.concatenate([[0.0], 10.0 ** logs]), indexing="ij")
        self._grid = np.column_stack([Pg.ravel(), Lg.ravel()])

    def scores(self, P, lam, g2):
        """max eigenvalue plus the strictness margin, vectorized over (P, lam)."""
        P = np.asarray(P, dtype=float)[..., None, None]
        lam = np.asarray(lam, dtype=float)[..., None, None]
        M = self.M0 + P * self.MP + lam * self.Mlam - g2 * self.Mgam
        top = np.linalg.eigvalsh(M)[..., -1]
        margin = self.margin_rel * (1.0 + np.max(np.abs(M), axis=(-2, -1)))
        return top + margin

    def __call__(self, g2: float, hint=None):
        if hint is not None:
            if self.scores(hint[0], hint[1], g2) < 0:
                return hint
        s = self.scores(self._grid[:, 0], self._grid[:, 1], g2)
        best = int(np.argmin(s))
        if s[best] < 0:
            return tuple(self._grid[best])
        starts = [self._grid[best]]
        if hint is not None:
            starts.insert(0, np.asarray(hint))
        for P0, l0 in starts:
            found = self._refine(g2, P0, l0)
            if found is not None:
                return found
        return None

    def _zoom(self, g2, z, half=1.0, shrink=0.6, steps=45, k=9):
        # coarse-to-fine grid in (log10 P, log10 lambda)
        offsets = np.linspace(-1.0, 1.0, k)
        du, dv = np.meshgrid(offsets, offsets, indexing="ij")
        du, dv = du.ravel(), dv.ravel()
        for _ in range(steps):
            zu, zv = z[0] + half * du, z[1] + half * dv
            s = self.scores(10.0 ** zu, 10.0 ** zv, g2)
            i = int(np.argmin(s))
            if s[i] < 0:
                raise _Found((10.0 ** zu[i], 10.0 ** zv[i]))
            z = np.array([zu[i], zv[i]])
            half *= shrink
        return z

    def _refine(self, g2, P0, l0):
        base = self.M0 - g2 * self.Mgam
        MP, Mlam, eigvalsh, rel = self.MP, self.Mlam, np.linalg.eigvalsh, self.margin_rel

        def obj(z):
            P, lam = 10.0 ** z[0], 10.0 ** z[1]
            M = base + P * MP + lam * Mlam
            val = eigvalsh(M)[-1] + rel * (1.0 + np.abs(M).max())
            if val < 0:
                raise _Found((P, lam))
            return val

        z0 = np.array([math.log10(max(P0, 1e-12)), math.log10(max(l0, 1e-6))])
        try:
            z = self._zoom(g2, z0)
            minimize(obj, z, method="Nelder-Mead",
                     options=dict(xatol=1e-13, fatol=1e-17, maxfev=120))
            # lambda = 0 boundary
            Ps = 10.0 ** np.linspace(-3.0, 7.0, 201)
            s = self.scores(Ps, np.zeros_like(Ps), g2)
            if s.min() < 0:
                return (float(Ps[np.argmin(s)]), 0.0)
        except _Found as hit:
            return hit.witness
        return None


def certify_gain(sys: LftSystem, sector: SectorBound, tol: float = 1e-4,
                 ceiling: float = 1e6, margin_rel: float = 1e-10) -> GainCertificate:
    """Smallest certifiable L2 gain of ``sys`` for nonlinearities in ``sector``.

    ``tol`` bounds the gap between the returned gamma and the true minimum:
    absolute below gamma = 1, relative above it. ``ceiling`` caps gamma^2.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    for s in (sector.alpha_hat, sector.beta_hat):
        if not sys.is_well_posed(s):
            raise ValueError(f"LFT loop is not well posed at slope {s}")

    search = _FeasibilitySearch(sys, sector, margin_rel)
    hint = search(ceiling)
    if hint is None:
        raise InfeasibleError(f"no certificate with gamma^2 <= {ceiling:g} for {sector}")

    # decade descent to bracket the optimum
    hi, lo = ceiling, 0.0
    floor = (0.1 * tol) ** 2
    g2 = ceiling / 10.0
    while g2 >= floor:
        w = search(g2, hint)
        if w is None:
            lo = g2
            break
        hi, hint = g2, w
        g2 /= 10.0

    def gap(lo, hi):
        return math.sqrt(hi) - math.sqrt(lo)

    while gap(lo, hi) > 0.5 * tol * max(1.0, math.sqrt(hi)):
        mid = 0.5 * (lo + hi)
        w = search(mid, hint)
        if w is None:
            lo = mid
        else:
            hi, hint = mid, w

    P = np.array([[hint[0]]])
    M = build_theorem1_matrix(sys, sector, P, hint[1], hi)
    if not is_negative_definite(M, margin_rel * (1.0 + float(np.max(np.abs(M))))):
        raise RuntimeError("certificate failed re-verification")
    return GainCertificate(
        gamma_hat=math.sqrt(hi), P=P, lambda_mult=float(hint[1]),
        bisection_tolerance=tol, sector=sector,
    )


def lti_lower_bound_oracle(sector: SectorBound) -> float:
    """Exact peak gain of the unitless block for the worst constant slope.

    With a constant slope s the loop is x[n+1] = c (x[n] + r[n]), c = s/(1+s),
    whose frequency response peaks at |c| / (1 - |c|).
    """
    worst = 0.0
    for s in (sector.alpha_hat, sector.beta_hat):
        c = abs(s / (1.0 + s))
        if c >= 1.0:
            return math.inf
        worst = max(worst, c / (1.0 - c))
    return worst


def gain_surface(sys: LftSystem, alpha_grid: Sequence[float], beta_grid: Sequence[float],
                 tol: float = 1e-4, ceiling: float = 1e6) -> GainSurface:
    alpha = np.asarray(alpha_grid, dtype=float)
    beta = np.asarray(beta_grid, dtype=float)
    if np.any(np.diff(alpha) < 0) or np.any(np.diff(beta) < 0):
        raise ValueError("grids must be sorted ascending")
    gamma = np.full((alpha.size, beta.size), math.inf)
    for i, a in enumerate(alpha):
        for j, b in enumerate(beta):
            try:
                gamma[i, j] = certify_gain(sys, SectorBound(a, b), tol, ceiling).gamma_hat
            except InfeasibleError:
                pass
    return GainSurface(alpha=alpha, beta=beta, gamma=gamma, tolerance=tol)


def current_block_gain_bound(params: ConverterParams, gamma_hat: float) -> float:
    """Voltage-to-current gain bound in A/V: (T_s^ss / L) * gamma_hat."""
    return compute_equilibrium(params).t_s_ss / params.L * gamma_hat
