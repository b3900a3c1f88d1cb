"""Flat ``key = value`` run configuration with engineering suffixes."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, Optional

from .converter import ConverterParams, Topology
from .lure import SectorBound


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MissingKey(ConfigError):
    def __init__(self, key: str, command: str = ""):
        self.key = key
        suffix = f" (required by '{command}')" if command else ""
        super().__init__(f"missing key {key!r}{suffix}")


class BadUnit(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class InvalidValue(ConfigError):
    pass


SI_PREFIX = {"p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "m": 1e-3, "k": 1e3}
_NUMBER = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*)$")

# key -> (kind, default, unit symbol accepted after the prefix)
# provenance: converter defaults follow the constant on-time design table
SCHEMA: Dict[str, tuple] = {
    "topology": ("topology", "BuckConstOn", ""),
    "V_in": ("float", None, "V"),         # 12 V
    "V_out": ("float", None, "V"),        # 2.2 V
    "L": ("float", None, "H"),            # 240 nH
    "C": ("float", None, "F"),            # 100 uF
    "R": ("float", None, "Ohm"),          # 0.4 or 0.05 Ohm
    "T_fixed": ("float", None, "s"),      # on-time 100 ns
    "lambda": ("float", 0.5, ""),
    "t_var_min": ("float", None, "s"),
    "t_var_max": ("float", None, "s"),
    "degenerate_timing": ("bool", False, ""),
    "R_s": ("float", None, "Ohm"),        # sense gain; accepted, unused
    "alpha_hat": ("float", None, ""),
    "beta_hat": ("float", None, ""),
    "gain_tol": ("float", 1e-4, ""),
    "gain_ceiling": ("float", 1e6, ""),
    "sector_tol": ("float", 1e-3, ""),
    "assumption_threshold": ("float", 0.1, ""),
    "case_ii_variant": ("str", "printed", ""),
    "grid_alpha_min": ("float", -0.45, ""),
    "grid_alpha_max": ("float", 0.0, ""),
    "grid_beta_min": ("float", 0.0, ""),
    "grid_beta_max": ("float", 0.45, ""),
    "grid_n": ("int", 21, ""),
    "n_cycles": ("int", 5000, ""),
    "i_cmd_step": ("float", 1.0, "A"),
    "interference": ("str", "alternating", ""),
    "slope": ("float", None, ""),
    "sin_amplitude": ("float", 0.0, "A"),
    "sin_period": ("float", 1e-6, "s"),
    "sin_phase": ("float", 0.0, ""),
    "seed": ("int", 0, ""),
    "settle_window": ("int", 500, ""),
    "settle_tol": ("float", 1e-6, "A"),
    "growth_factor": ("float", 1.05, ""),
    "out_dir": ("str", None, ""),
}

ALIASES = {"T_on": "T_fixed", "T_off": "T_fixed", "Vin": "V_in", "Vout": "V_out", "lam": "lambda"}

CONVERTER_KEYS = ("V_in", "V_out", "L", "C", "R", "T_fixed")
REQUIRED = {
    "equilibrium": CONVERTER_KEYS,
    "gain-surface": (),
    "certify": CONVERTER_KEYS + ("alpha_hat", "beta_hat"),
    "max-sector": CONVERTER_KEYS,
    "simulate": CONVERTER_KEYS,
    "validate-tables": (),
}

INTERFERENCE_KINDS = ("none", "alternating", "constant", "random", "sinusoid")


def parse_si(text: str, unit: str = "", line: Optional[int] = None) -> float:
    """``"240n"`` -> 2.4e-7. A unit symbol may follow the prefix (``"240nH"``)."""
    m = _NUMBER.match(text.strip())
    if not m:
        raise InvalidValue(f"not a number: {text!r}", line)
    value, tail = float(m.group(1)), m.group(2).strip()
    if unit and tail.endswith(unit):
        tail = tail[: -len(unit)]
    elif unit == "Ohm" and tail.endswith("Ω"):
        tail = tail[:-1]
    if tail == "":
        return value
    if tail in SI_PREFIX:
        return value * SI_PREFIX[tail]
    raise BadUnit(f"unrecognized unit suffix {tail!r} in {text!r}", line)


def _convert(key: str, raw: str, line: int):
    kind, _, unit = SCHEMA[key]
    if kind == "float":
        return parse_si(raw, unit, line)
    if kind == "int":
        v = parse_si(raw, unit, line)
        if v != int(v):
            raise InvalidValue(f"{key} must be an integer, got {raw!r}", line)
        return int(v)
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise InvalidValue(f"{key} must be a boolean, got {raw!r}", line)
    if kind == "topology":
        try:
            return Topology.parse(raw)
        except ValueError as exc:
            raise InvalidValue(str(exc), line) from None
    return raw


def _check_range(key, value, line):
    if key == "lambda" and not 0.0 <= value <= 1.0:
        raise InvalidValue(f"lambda must lie in [0, 1], got {value!r}", line)
    if key == "interference" and value not in INTERFERENCE_KINDS:
        raise InvalidValue(f"interference must be one of {INTERFERENCE_KINDS}", line)
    if key == "case_ii_variant" and value not in ("printed", "normalized"):
        raise InvalidValue("case_ii_variant must be 'printed' or 'normalized'", line)
    if key in ("grid_n", "n_cycles", "settle_window") and value < 1:
        raise InvalidValue(f"{key} must be positive", line)


@dataclass
class RunConfig:
    values: dict
    lines: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def require(self, command: str):
        if command not in REQUIRED:
            raise ConfigError(f"unknown command {command!r}")
        for key in REQUIRED[command]:
            if self.values.get(key) is None:
                raise MissingKey(key, command)

    def converter_params(self) -> ConverterParams:
        for key in CONVERTER_KEYS:
            if self.values.get(key) is None:
                raise MissingKey(key)
        try:
            params = ConverterParams(
                v_in=self["V_in"], v_out=self["V_out"], L=self["L"], C=self["C"], R=self["R"],
                t_fixed=self["T_fixed"], lam=self["lambda"], t_var_min=self["t_var_min"],
                t_var_max=self["t_var_max"], topology=self["topology"],
            )
        except ValueError as exc:
            raise InvalidValue(str(exc)) from None
        if self["degenerate_timing"]:
            params = params.with_degenerate_timing()
        return params

    def sector(self) -> SectorBound:
        for key in ("alpha_hat", "beta_hat"):
            if self.values.get(key) is None:
                raise MissingKey(key)
        try:
            return SectorBound(self["alpha_hat"], self["beta_hat"])
        except ValueError as exc:
            raise InvalidValue(str(exc), self.lines.get("alpha_hat")) from None

    def echo(self, prefix: str = "# ") -> str:
        """Every key with its resolved value, defaults included."""
        out = []
        for key in SCHEMA:
            v = self.values.get(key)
            if isinstance(v, Topology):
                v = v.value
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = f"{v:.10e}"
            elif v is None:
                v = ""
            out.append(f"{prefix}{key} = {v}")
        return "\n".join(out) + "\n"


def parse_config(text: str) -> RunConfig:
    values = {k: spec[1] for k, spec in SCHEMA.items()}
    values["topology"] = Topology.BUCK_CONST_ON
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise InvalidValue(f"expected 'key = value', got {body!r}", lineno)
        key, value = (part.strip() for part in body.split("=", 1))
        key = ALIASES.get(key, key)
        if key not in SCHEMA:
            raise UnknownKey(f"unknown key {key!r}", lineno)
        if key in lines:
            raise InvalidValue(f"duplicate key {key!r} (first set on line {lines[key]})", lineno)
        if value == "":
            raise InvalidValue(f"empty value for {key!r}", lineno)
        converted = _convert(key, value, lineno)
        _check_range(key, converted, lineno)
        values[key] = converted
        lines[key] = lineno
    return RunConfig(values=values, lines=lines)


def table1_config_text(R: float = 0.4, alpha_hat: float = -0.48, beta_hat: float = 0.48) -> str:
    """Config text for the constant on-time design, used by examples and tests."""
    return (
        "# constant on-time buck design\n"
        "V_in = 12\n"
        "V_out = 2.2\n"
        "L = 240n\n"
        "C = 100u\n"
        f"R = {R!r}\n"
        "T_on = 100n\n"
        "lambda = 0.5\n"
        f"alpha_hat = {alpha_hat!r}\n"
        f"beta_hat = {beta_hat!r}\n"
    )
