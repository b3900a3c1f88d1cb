"""Converter parameters, equilibrium and the class-Sigma modeling checks.

All quantities are SI base units (V, A, H, F, Ohm, s).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional


class Topology(enum.Enum):
    BUCK_CONST_ON = "BuckConstOn"
    BOOST_CONST_OFF = "BoostConstOff"

    @classmethod
    def parse(cls, text: str) -> "Topology":
        key = text.strip().lower().replace("_", "").replace("-", "")
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown topology {text!r}")


def steady_state_varying_interval(v_in, v_out, t_fixed, topology: Topology) -> float:
    """Steady-state duration of the cycle-varying interval.

    Off-time for the constant on-time buck, on-time for the constant
    off-time boost.
    """
    if topology is Topology.BUCK_CONST_ON:
        return (v_in - v_out) / v_out * t_fixed
    return (v_out / v_in - 1.0) * t_fixed


@dataclass(frozen=True)
class ConverterParams:
    """Physical and control parameters of a class-Sigma converter.

    ``t_fixed`` is the constant interval (T_on for the buck, T_off for the
    boost). ``t_var_min``/``t_var_max`` bound the cycle-varying interval; when
    left as ``None`` they default to half and twice its steady-state value.
    Those defaults are arbitrary and every report echoes the values in use.
    """

    v_in: float
    v_out: float
    L: float
    C: float
    R: float
    t_fixed: float
    lam: float = 0.5
    t_var_min: Optional[float] = None
    t_var_max: Optional[float] = None
    topology: Topology = Topology.BUCK_CONST_ON

    def __post_init__(self):
        for name in ("v_in", "v_out", "L", "C", "R", "t_fixed"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam!r}")
        if self.topology is Topology.BUCK_CONST_ON and not self.v_out < self.v_in:
            raise ValueError("buck requires v_out < v_in")
        if self.topology is Topology.BOOST_CONST_OFF and not self.v_out > self.v_in:
            raise ValueError("boost requires v_out > v_in")

        t_ss = steady_state_varying_interval(self.v_in, self.v_out, self.t_fixed, self.topology)
        if self.t_var_min is None:
            object.__setattr__(self, "t_var_min", 0.5 * t_ss)
        if self.t_var_max is None:
            object.__setattr__(self, "t_var_max", 2.0 * t_ss)
        if not self.t_var_min > 0:
            raise ValueError("t_var_min must be strictly positive")
        if not self.t_var_min <= self.t_var_max:
            raise ValueError("t_var_min must not exceed t_var_max")

    @property
    def is_buck(self) -> bool:
        return self.topology is Topology.BUCK_CONST_ON

    def replace(self, **changes) -> "ConverterParams":
        from dataclasses import replace

        return replace(self, **changes)

    def with_degenerate_timing(self) -> "ConverterParams":
        """Copy with both varying-interval bounds pinned to steady state."""
        t_ss = compute_equilibrium(self).t_var_ss
        return self.replace(t_var_min=t_ss, t_var_max=t_ss)

    def as_dict(self) -> dict:
        return {
            "topology": self.topology.value,
            "V_in": self.v_in,
            "V_out": self.v_out,
            "L": self.L,
            "C": self.C,
            "R": self.R,
            "T_fixed": self.t_fixed,
            "lambda": self.lam,
            "t_var_min": self.t_var_min,
            "t_var_max": self.t_var_max,
        }


@dataclass(frozen=True)
class Equilibrium:
    # i_valley is None for the boost: its valley current is not modeled here.
    i_valley: Optional[float]
    t_var_ss: float
    t_s_ss: float


@dataclass(frozen=True)
class DerivedConstants:
    tau1: float
    tau2: float
    t_s_min: float
    t_s_max: float


@dataclass(frozen=True)
class AssumptionReport:
    ratio_rc: float
    ratio_ripple: float
    threshold: float
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "passed", self.ratio_rc < self.threshold and self.ratio_ripple < self.threshold
        )


def compute_equilibrium(params: ConverterParams) -> Equilibrium:
    t_var = steady_state_varying_interval(params.v_in, params.v_out, params.t_fixed, params.topology)
    t_s = params.t_fixed + t_var
    if params.is_buck:
        rise = (params.v_in - params.v_out) / params.L
        i_valley = params.v_out / params.R - 0.5 * rise * params.t_fixed
    else:
        i_valley = None
    return Equilibrium(i_valley=i_valley, t_var_ss=t_var, t_s_ss=t_s)


def derived_constants(params: ConverterParams) -> DerivedConstants:
    return DerivedConstants(
        tau1=params.R * params.C,
        tau2=params.L / params.R,
        t_s_min=params.t_fixed + params.t_var_min,
        t_s_max=params.t_fixed + params.t_var_max,
    )


def validate_class_sigma(params: ConverterParams, threshold: float = 0.1) -> AssumptionReport:
    """Evaluate the slow-filter and small-ripple ratios at the longest period.

    The ratios are reported against ``threshold``; a failure is informative
    only; nothing downstream refuses to run on it.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    t_s_max = derived_constants(params).t_s_max
    return AssumptionReport(
        ratio_rc=t_s_max / (params.R * params.C),
        ratio_ripple=t_s_max * params.t_fixed / (2.0 * params.L * params.C),
        threshold=threshold,
    )


def table1_buck(R: float = 0.4, lam: float = 0.5, **overrides) -> ConverterParams:
    """Constant on-time buck design used throughout the validation runs."""
    base = dict(v_in=12.0, v_out=2.2, L=240e-9, C=100e-6, R=R, t_fixed=100e-9, lam=lam)
    base.update(overrides)
    return ConverterParams(**base)
