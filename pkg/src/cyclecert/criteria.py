"""Small-gain stability criteria for cycle-by-cycle current-mode converters."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

from .converter import (AssumptionReport, ConverterParams, compute_equilibrium,
                        derived_constants, validate_class_sigma)
from .lure import (InfeasibleError, SectorBound, certify_gain, current_block_gain_bound,
                   unitless_current_block)
from .voltage import AssumptionViolated, voltage_block_gain_bound


class Verdict(enum.Enum):
    CERTIFIED = "Certified"
    NOT_CERTIFIED = "NotCertified"


class BoostBranch(enum.Enum):
    CASE_I = "CaseI"
    CASE_II = "CaseII"


@dataclass(frozen=True)
class Inequality:
    """One strict inequality lhs < rhs."""

    name: str
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs < self.rhs

    @property
    def margin(self) -> float:
        if math.isinf(self.lhs):
            return -math.inf
        return (self.rhs - self.lhs) / abs(self.rhs) if self.rhs != 0 else self.rhs - self.lhs


@dataclass
class StabilityReport:
    checks: list
    assumptions: AssumptionReport
    sector: SectorBound
    gamma_hat: float
    params: ConverterParams
    loop_gain_product: Optional[float] = None
    branch: Optional[BoostBranch] = None
    extra: dict = field(default_factory=dict)

    @property
    def verdict(self) -> Verdict:
        ok = all(c.holds for c in self.checks)
        return Verdict.CERTIFIED if ok else Verdict.NOT_CERTIFIED

    @property
    def margin(self) -> float:
        return min(c.margin for c in self.checks)

    def items(self):
        """Flat (key, value) pairs; the order is stable."""
        out = [("verdict", self.verdict.value)]
        out += [(f"param.{k}", v) for k, v in self.params.as_dict().items()]
        out += [
            ("alpha_hat", self.sector.alpha_hat),
            ("beta_hat", self.sector.beta_hat),
            ("gamma_hat", self.gamma_hat),
            ("loop_gain_product", self.loop_gain_product),
            ("branch", self.branch.value if self.branch else None),
        ]
        for c in self.checks:
            out += [(f"{c.name}.lhs", c.lhs), (f"{c.name}.rhs", c.rhs),
                    (f"{c.name}.holds", c.holds)]
        out += sorted(self.extra.items())
        out += [
            ("assumptions.ratio_rc", self.assumptions.ratio_rc),
            ("assumptions.ratio_ripple", self.assumptions.ratio_ripple),
            ("assumptions.threshold", self.assumptions.threshold),
            ("assumptions.pass", self.assumptions.passed),
            ("margin", self.margin),
        ]
        return out

    def to_text(self) -> str:
        return "\n".join(f"{k} = {_fmt(v)}" for k, v in self.items()) + "\n"

    def csv_header(self) -> str:
        return ",".join(k for k, _ in self.items())

    def csv_row(self) -> str:
        return ",".join(_fmt(v) for _, v in self.items())


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.10e}"
    return str(v)


def small_gain_check(gamma_iv: float, gamma_vi: float):
    if gamma_iv < 0 or gamma_vi < 0:
        raise ValueError("gains must be nonnegative")
    product = gamma_iv * gamma_vi
    return product, product < 1.0


def buck_threshold(params: ConverterParams) -> float:
    """Largest admissible current-block gain g for the on-time buck."""
    dc = derived_constants(params)
    t_ss = compute_equilibrium(params).t_s_ss
    return (dc.tau2 + 0.5 * params.t_fixed) * dc.t_s_min / dc.t_s_max / t_ss


def buck_on_time_criterion(params: ConverterParams, sector: SectorBound, gamma_hat: float,
                           assumption_threshold: float = 0.1) -> StabilityReport:
    if not params.is_buck:
        raise ValueError("criterion applies to the constant on-time buck")
    dc = derived_constants(params)
    gain_check = Inequality("gain", gamma_hat, buck_threshold(params))
    filter_check = Inequality(
        "filter", dc.t_s_max * (1.0 + params.t_fixed / (2.0 * dc.tau2)), dc.tau1
    )
    product = None
    extra = {}
    try:
        g_iv = voltage_block_gain_bound(params).gamma_i_to_v
        g_vi = current_block_gain_bound(params, gamma_hat)
        product = small_gain_check(g_iv, g_vi)[0]
        extra = {"gamma_i_to_v": g_iv, "gamma_v_to_i": g_vi}
    except AssumptionViolated:
        pass
    return StabilityReport(
        checks=[gain_check, filter_check],
        assumptions=validate_class_sigma(params, assumption_threshold),
        sector=sector, gamma_hat=gamma_hat, params=params,
        loop_gain_product=product, extra=extra,
    )


def certify_buck(params: ConverterParams, sector: SectorBound, tol: float = 1e-4,
                 **kw) -> StabilityReport:
    """Solve for g on ``sector`` and evaluate the buck criterion with it."""
    try:
        gamma = certify_gain(unitless_current_block(), sector, tol).gamma_hat
    except InfeasibleError:
        gamma = math.inf
    return buck_on_time_criterion(params, sector, gamma, **kw)


def max_stable_sector(params: ConverterParams, tol: float = 1e-3, gain_tol: float = 1e-5) -> float:
    """Largest a such that the symmetric sector [-a, a] is certified.

    Bisection over a in [0, 1/2); the unitless block has unbounded gain as
    a approaches 1/2.
    """
    if not params.is_buck:
        raise ValueError("criterion applies to the constant on-time buck")

    def certified(a):
        return certify_buck(params, SectorBound.symmetric(a), gain_tol).verdict is Verdict.CERTIFIED

    if not certified(0.0):
        return 0.0
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if certified(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _boost_quantities(params: ConverterParams):
    eq = compute_equilibrium(params)
    dc = derived_constants(params)
    t_off = params.t_fixed
    k = params.v_out * params.L / (params.v_in * params.R)
    return eq, dc, t_off, k


def boost_discriminant(params: ConverterParams) -> float:
    """Branch selector; its sign picks case (i) (>= 0) or case (ii) (< 0). Units: s."""
    eq, dc, t_off, k = _boost_quantities(params)
    lam, RC, LC = params.lam, params.R * params.C, params.L * params.C
    bracket = 1.0 - eq.t_s_ss / RC - dc.t_s_max / RC - t_off ** 2 / (2.0 * LC)
    return ((1.0 - lam) * t_off + k) * bracket + (lam * t_off - k)


def select_boost_branch(discriminant: float) -> BoostBranch:
    return BoostBranch.CASE_I if discriminant >= 0 else BoostBranch.CASE_II


def boost_case_i_threshold(params: ConverterParams) -> float:
    eq, dc, t_off, _ = _boost_quantities(params)
    return 0.5 + dc.tau2 * (eq.t_s_ss + dc.t_s_min) / (eq.t_s_ss * t_off)


def boost_case_ii_printed(params: ConverterParams) -> float:
    """Case (ii) threshold in its original form; carries units of s^2."""
    eq, dc, t_off, _ = _boost_quantities(params)
    tau1, tau2, lam = dc.tau1, dc.tau2, params.lam
    ratio = (2 * tau2 * (dc.t_s_min + eq.t_s_ss) + t_off ** 2) / (
        2 * tau2 * (dc.t_s_max + eq.t_s_ss) + t_off ** 2
    )
    num = 2 * tau1 - eq.t_s_ss - dc.t_s_max - t_off ** 2 / (2 * tau2)
    den = 2 * params.v_out / params.v_in + (1 - 2 * lam) * t_off / tau2
    return ratio * num / den * t_off


def boost_case_ii_normalized(params: ConverterParams) -> float:
    """Printed case (ii) threshold divided by T_off^2, which makes it unitless."""
    return boost_case_ii_printed(params) / params.t_fixed ** 2


def boost_off_time_criterion(params: ConverterParams, sector: SectorBound, gamma_hat: float,
                             case_ii_variant: str = "printed",
                             assumption_threshold: float = 0.1) -> StabilityReport:
    if params.is_buck:
        raise ValueError("criterion applies to the constant off-time boost")
    if case_ii_variant not in ("printed", "normalized"):
        raise ValueError("case_ii_variant must be 'printed' or 'normalized'")
    D = boost_discriminant(params)
    branch = select_boost_branch(D)
    printed = boost_case_ii_printed(params)
    normalized = boost_case_ii_normalized(params)
    if branch is BoostBranch.CASE_I:
        check = Inequality("gain", gamma_hat, boost_case_i_threshold(params))
    else:
        rhs = printed if case_ii_variant == "printed" else normalized
        check = Inequality("gain", gamma_hat, rhs)
    extra = {
        "discriminant_s": D,
        "case_i_threshold": boost_case_i_threshold(params),
        "case_ii_printed": printed,
        "case_ii_normalized": normalized,
        "case_ii_variant": case_ii_variant,
    }
    return StabilityReport(
        checks=[check],
        assumptions=validate_class_sigma(params, assumption_threshold),
        sector=sector, gamma_hat=gamma_hat, params=params, branch=branch, extra=extra,
    )
