"""Voltage-block gain bound for the constant on-time buck.

The sampled output voltage obeys a first-order linear time-varying map whose
coefficients depend only on the realized off-time, so the gain bound follows
from the extreme coefficient values over the admissible off-time interval.
"""

from __future__ import annotations

from dataclasses import dataclass

from .converter import ConverterParams, derived_constants


class AssumptionViolated(ValueError):
    """Coefficient signs required by the storage-function argument fail."""


@dataclass(frozen=True)
class LtvCoefficients:
    alpha_n: float
    beta_n: float   # V/A
    gamma_n: float  # V/A


@dataclass(frozen=True)
class CoefficientBounds:
    alpha_max: float
    beta_max: float
    gamma_max: float


@dataclass(frozen=True)
class VoltageGainBound:
    gamma_1: float
    gamma_i_to_v: float
    closed_form: float
    bounds: CoefficientBounds


def _require_buck(params: ConverterParams):
    if not params.is_buck:
        raise ValueError("voltage-block bound is derived for the constant on-time buck only")


def ltv_coefficients(params: ConverterParams, t_off: float, check_bounds: bool = True) -> LtvCoefficients:
    """Coefficients of v[n+1] = a v[n] + b i[n] + c i[n+1] at off-time ``t_off``."""
    _require_buck(params)
    if check_bounds:
        slack = 1e-12 * params.t_var_max
        if not params.t_var_min - slack <= t_off <= params.t_var_max + slack:
            raise ValueError(
                f"t_off={t_off:g} s outside [{params.t_var_min:g}, {params.t_var_max:g}]"
            )
    t_on, R, L, C, lam = params.t_fixed, params.R, params.L, params.C, params.lam
    period = t_on + t_off
    return LtvCoefficients(
        alpha_n=1.0 - period / (R * C) - t_on * period / (2.0 * L * C),
        beta_n=((1.0 - lam) * t_on + 0.5 * t_off) / C,
        gamma_n=(lam * t_on + 0.5 * t_off) / C,
    )


def coefficient_bounds(params: ConverterParams) -> CoefficientBounds:
    _require_buck(params)
    t_on, R, L, C, lam = params.t_fixed, params.R, params.L, params.C, params.lam
    dc = derived_constants(params)
    # alpha decreases with t_off: its smallest value sits at the longest period
    alpha_low = ltv_coefficients(params, params.t_var_max).alpha_n
    if alpha_low <= 0.0:
        raise AssumptionViolated(
            f"alpha={alpha_low:.4g} <= 0 at t_off={params.t_var_max:g} s; "
            "switching period is not short against RC and LC"
        )
    return CoefficientBounds(
        alpha_max=1.0 - dc.t_s_min / (R * C) - t_on * dc.t_s_min / (2.0 * L * C),
        beta_max=((1.0 - lam) * t_on + 0.5 * params.t_var_max) / C,
        gamma_max=(lam * t_on + 0.5 * params.t_var_max) / C,
    )


def voltage_block_gain_bound(params: ConverterParams) -> VoltageGainBound:
    """Current-to-voltage L2 gain bound, in ohms.

    Returns the storage-function bound Gamma_1 on the auxiliary state, the
    block bound Gamma_1 + gamma_max, and the closed form
    R / (1 + T_on / (2 tau2)) * T_s^max / T_s^min for comparison.
    """
    b = coefficient_bounds(params)
    if b.alpha_max >= 1.0:
        raise AssumptionViolated("alpha_max >= 1")
    gamma_1 = (b.beta_max + b.alpha_max * b.gamma_max) / (1.0 - b.alpha_max)
    total = gamma_1 + b.gamma_max
    dc = derived_constants(params)
    closed = params.R / (1.0 + params.t_fixed / (2.0 * dc.tau2)) * dc.t_s_max / dc.t_s_min
    if abs(total - closed) > 1e-9 * abs(closed):
        raise ArithmeticError(f"bound {total!r} disagrees with closed form {closed!r}")
    return VoltageGainBound(gamma_1=gamma_1, gamma_i_to_v=total, closed_form=closed, bounds=b)
