"""Cycle-by-cycle simulation of the constant on-time buck in the sampled frame.

State per cycle: deviation of the one-cycle-delayed valley current, deviation
of the sampled output voltage, and the realized off-time. The off-time comes
from the valley comparator (with measurement interference); the voltage
update uses the linear time-varying map evaluated at that off-time.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .converter import ConverterParams, compute_equilibrium
from .lure import GainCertificate, SectorBound
from .voltage import ltv_coefficients


class Diverged(RuntimeError):
    pass


class NonMonotoneResidualWarning(RuntimeWarning):
    pass


class SectorViolationWarning(RuntimeWarning):
    pass


class InterferenceKind(enum.Enum):
    NONE = "None"
    SCHEDULE = "SectorGainSchedule"
    SINUSOID = "Sinusoid"


@dataclass(frozen=True)
class InterferenceModel:
    """Measurement interference on the sensed inductor current.

    A slope schedule realizes Delta(z) = s[n] z cycle by cycle; the slopes
    repeat periodically when the run is longer than the schedule. A sinusoid
    w(t) = amplitude * sin(2 pi t / period + phase) is a function of the time
    elapsed since the start of the off-interval.
    """

    kind: InterferenceKind = InterferenceKind.NONE
    slopes: tuple = ()
    sector: Optional[SectorBound] = None
    amplitude: float = 0.0
    period: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind is InterferenceKind.SCHEDULE:
            if not self.slopes:
                raise ValueError("schedule needs at least one slope")
            s = np.asarray(self.slopes, dtype=float)
            if np.any(s <= -1.0):
                raise ValueError("slopes must exceed -1")
            if self.sector is not None:
                lo, hi = self.sector.alpha_hat, self.sector.beta_hat
                if np.any(s < lo - 1e-12) or np.any(s > hi + 1e-12):
                    raise ValueError("schedule leaves the declared sector")
        if self.kind is InterferenceKind.SINUSOID and not self.period > 0:
            raise ValueError("sinusoid period must be positive")

    @classmethod
    def none(cls) -> "InterferenceModel":
        return cls()

    @classmethod
    def schedule(cls, slopes: Sequence[float], sector: Optional[SectorBound] = None):
        return cls(kind=InterferenceKind.SCHEDULE, slopes=tuple(float(s) for s in slopes),
                   sector=sector)

    @classmethod
    def alternating(cls, a: float) -> "InterferenceModel":
        """Worst-case symmetric schedule: -a, +a, -a, ..."""
        return cls.schedule([-abs(a), abs(a)], SectorBound.symmetric(a))

    @classmethod
    def random_schedule(cls, sector: SectorBound, n: int, rng: np.random.Generator):
        slopes = rng.uniform(sector.alpha_hat, sector.beta_hat, size=n)
        return cls.schedule(slopes, sector)

    @classmethod
    def sinusoid(cls, amplitude: float, period: float, phase: float = 0.0,
                 sector: Optional[SectorBound] = None):
        return cls(kind=InterferenceKind.SINUSOID, amplitude=amplitude, period=period,
                   phase=phase, sector=sector)

    def slope_at(self, n: int) -> float:
        if self.kind is not InterferenceKind.SCHEDULE:
            return 0.0
        return self.slopes[n % len(self.slopes)]

    def w(self, t):
        return self.amplitude * np.sin(2.0 * np.pi * t / self.period + self.phase)

    def describe(self) -> str:
        if self.kind is InterferenceKind.SCHEDULE:
            head = ",".join(f"{s:g}" for s in self.slopes[:4])
            more = "..." if len(self.slopes) > 4 else ""
            return f"schedule[{len(self.slopes)}]({head}{more})"
        if self.kind is InterferenceKind.SINUSOID:
            return f"sinusoid(A={self.amplitude:g},T={self.period:g},phi={self.phase:g})"
        return "none"


@dataclass(frozen=True)
class CycleState:
    n: int
    i_tilde: float
    v_tilde: float
    t_off: float
    q: float = 0.0
    clamped: bool = False


@dataclass
class TransientTrace:
    n: np.ndarray
    i_tilde: np.ndarray
    v_tilde: np.ndarray
    t_off: np.ndarray
    q: np.ndarray
    clamped: np.ndarray
    params: ConverterParams
    command: str = ""
    interference: str = ""
    diverged_at: Optional[int] = None
    sector_violations: int = 0

    def __len__(self):
        return len(self.n)

    @property
    def truncated(self) -> bool:
        return self.diverged_at is not None

    def states(self):
        return [
            CycleState(int(k), float(i), float(v), float(t), float(q), bool(c))
            for k, i, v, t, q, c in zip(self.n, self.i_tilde, self.v_tilde, self.t_off,
                                        self.q, self.clamped)
        ]

    def to_csv(self) -> str:
        lines = ["n,i_tilde_A,v_tilde_V,t_off_s,clamped"]
        for k, i, v, t, c in zip(self.n, self.i_tilde, self.v_tilde, self.t_off, self.clamped):
            lines.append(f"{k},{i:.10e},{v:.10e},{t:.10e},{int(c)}")
        if self.truncated:
            lines.append(f"# diverged at cycle {self.diverged_at}")
        return "\n".join(lines) + "\n"


class Stability(enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class SimVerdict:
    classification: Stability
    peak_deviation: float
    final_rms: float
    mid_rms: float
    divergence_cycle: Optional[int] = None

    def to_text(self) -> str:
        return (
            f"classification = {self.classification.value}\n"
            f"peak_deviation_A = {self.peak_deviation:.10e}\n"
            f"final_window_rms_A = {self.final_rms:.10e}\n"
            f"mid_window_rms_A = {self.mid_rms:.10e}\n"
            f"divergence_cycle = {'' if self.divergence_cycle is None else self.divergence_cycle}\n"
        )


# -- current map -----------------------------------------------------------

def operating_point(params: ConverterParams, i_cmd_tilde: float):
    """Fixed point (i_tilde, v_tilde, t_off) reached under a constant command deviation."""
    eq = compute_equilibrium(params)
    half_ramp = params.t_fixed / (2.0 * params.L)
    v = (eq.i_valley + i_cmd_tilde + params.v_in * half_ramp) / (1.0 / params.R + half_ramp)
    if not 0.0 < v < params.v_in:
        raise ValueError(f"command deviation {i_cmd_tilde:g} A has no buck operating point")
    t_off = (params.v_in - v) / v * params.t_fixed
    return i_cmd_tilde, v - params.v_out, t_off


def _valley(params, eq, state, t):
    """Valley-current deviation if the off-interval lasts ``t``."""
    V = params.v_out
    return (state.i_tilde - state.v_tilde * params.t_fixed / params.L
            - ((V + state.v_tilde) * t - V * eq.t_var_ss) / params.L)


def solve_off_time(state: CycleState, params: ConverterParams, interference: InterferenceModel,
                   i_cmd_tilde: float):
    """Off-time at which the sensed current first falls to the command.

    Returns ``(t_off, clamped)``. When the comparator would fire outside
    ``[t_var_min, t_var_max]`` the off-time is clamped to the violated bound.
    A slope schedule acts on the off-time deviation from the operating point
    that the command settles to, so a settled run carries no forced ripple.
    """
    eq = compute_equilibrium(params)
    t_lo, t_hi = params.t_var_min, params.t_var_max
    v = params.v_out + state.v_tilde
    if v <= 0:
        raise Diverged("output voltage collapsed")
    m2 = v / params.L

    if interference.kind is InterferenceKind.SINUSOID:
        w_ref = interference.w(eq.t_var_ss)

        def residual(t):
            return _valley(params, eq, state, t) - i_cmd_tilde + interference.w(t) - w_ref

        grid = np.linspace(t_lo, t_hi, 257)
        f = residual(grid)
        if f[0] <= 0:
            return t_lo, t_lo < t_hi
        below = np.nonzero(f <= 0)[0]
        if below.size == 0:
            return t_hi, True
        if np.count_nonzero(np.diff(np.sign(f)) != 0) > 1:
            warnings.warn("comparator residual crosses zero more than once; first root taken",
                          NonMonotoneResidualWarning, stacklevel=2)
        k = below[0]
        return brentq(residual, grid[k - 1], grid[k], xtol=1e-15), False

    s = interference.slope_at(state.n)
    t_ref = eq.t_var_ss
    if s != 0.0:
        t_ref = operating_point(params, i_cmd_tilde)[2]
    a0 = _valley(params, eq, state, 0.0) - i_cmd_tilde
    t = (a0 + s * m2 * t_ref) / ((1.0 + s) * m2)
    if t < t_lo:
        return t_lo, True
    if t > t_hi:
        return t_hi, True
    return t, False


def step_cycle(state: CycleState, params: ConverterParams, interference: InterferenceModel,
               i_cmd_tilde: float, i_guard: float = 1e3, v_guard: float = 1e3) -> CycleState:
    eq = compute_equilibrium(params)
    t_off, clamped = solve_off_time(state, params, interference, i_cmd_tilde)
    i_next = _valley(params, eq, state, t_off)
    co = ltv_coefficients(params, t_off)
    v_next = co.alpha_n * state.v_tilde + co.beta_n * state.i_tilde + co.gamma_n * i_next
    if not (abs(i_next) <= i_guard and abs(v_next) <= v_guard) or params.v_out + v_next <= 0:
        raise Diverged(f"guard exceeded at cycle {state.n + 1}")
    return CycleState(
        n=state.n + 1, i_tilde=i_next, v_tilde=v_next, t_off=t_off,
        q=v_next - co.gamma_n * i_next, clamped=clamped,
    )


CommandProfile = Union[float, Sequence[float], Callable[[int], float]]


def _command_fn(profile: CommandProfile) -> Callable[[int], float]:
    if callable(profile):
        return profile
    if np.isscalar(profile):
        value = float(profile)
        return lambda n: value
    seq = [float(x) for x in profile]
    return lambda n: seq[min(n, len(seq) - 1)]


def _realized_slope(params, eq, state, nxt, interference, i_cmd_tilde):
    p = (params.v_out + state.v_tilde) / params.L * (nxt.t_off - eq.t_var_ss)
    if abs(p) < 1e-12:
        return None
    h = nxt.i_tilde - i_cmd_tilde
    return h / p


def run_transient(params: ConverterParams, interference: InterferenceModel,
                  command_profile: CommandProfile, n_cycles: int,
                  initial: Optional[CycleState] = None,
                  i_guard: float = 1e3, v_guard: float = 1e3) -> TransientTrace:
    """Iterate the cycle map; a guard violation truncates the trace."""
    if n_cycles < 1:
        raise ValueError("n_cycles must be at least 1")
    eq = compute_equilibrium(params)
    cmd = _command_fn(command_profile)
    state = initial or CycleState(0, 0.0, 0.0, eq.t_var_ss)
    states = [state]
    diverged = None
    violations = 0
    check_sector = interference.kind is InterferenceKind.SINUSOID and interference.sector is not None
    for k in range(n_cycles):
        try:
            nxt = step_cycle(state, params, interference, cmd(k), i_guard, v_guard)
        except Diverged:
            diverged = state.n + 1
            break
        if check_sector and not nxt.clamped:
            s = _realized_slope(params, eq, state, nxt, interference, cmd(k))
            sec = interference.sector
            if s is not None and not sec.alpha_hat - 1e-9 <= s <= sec.beta_hat + 1e-9:
                violations += 1
        states.append(nxt)
        state = nxt
    if violations:
        warnings.warn(f"{violations} cycles left the declared sector", SectorViolationWarning,
                      stacklevel=2)
    arr = lambda attr, dt=float: np.array([getattr(s, attr) for s in states], dtype=dt)
    desc = command_profile if np.isscalar(command_profile) else "profile"
    return TransientTrace(
        n=arr("n", int), i_tilde=arr("i_tilde"), v_tilde=arr("v_tilde"),
        t_off=arr("t_off"), q=arr("q"), clamped=arr("clamped", bool),
        params=params, command=f"i_cmd_tilde={desc}", interference=interference.describe(),
        diverged_at=diverged, sector_violations=violations,
    )


def _window_rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean((x - x.mean()) ** 2)))


def classify_stability(trace: TransientTrace, settle_window: int = 500, settle_tol: float = 1e-6,
                       growth_factor: float = 1.05) -> SimVerdict:
    """Label a current trace Stable, Unstable or Indeterminate.

    Window RMS is taken about the window mean, so a trace that settles to a
    new operating point after a command step counts as settled. Order of
    tests: divergence, then settling (final RMS below ``settle_tol``), then
    growth of the final window over the mid-trace window.
    """
    x = trace.i_tilde
    peak = float(np.max(np.abs(x))) if len(x) else 0.0
    if trace.truncated:
        return SimVerdict(Stability.UNSTABLE, peak, math.inf, math.inf, trace.diverged_at)
    if len(x) < 2 * settle_window:
        raise ValueError(f"trace has {len(x)} cycles, needs at least {2 * settle_window}")
    final = _window_rms(x[-settle_window:])
    start = len(x) // 2 - settle_window // 2
    mid = _window_rms(x[start:start + settle_window])
    if final < settle_tol:
        label = Stability.STABLE
    elif final > growth_factor * mid:
        label = Stability.UNSTABLE
    else:
        label = Stability.INDETERMINATE
    return SimVerdict(label, peak, final, mid)


# -- unitless current loop and empirical gains ---------------------------

@dataclass
class LoopTrace:
    """Signals of the unitless current loop; x has one more sample than the rest."""

    x: np.ndarray
    p: np.ndarray
    h: np.ndarray
    e: np.ndarray
    r: np.ndarray
    slopes: np.ndarray


def simulate_unitless_loop(slopes, r) -> LoopTrace:
    """Run x[n+1] = h, p = x - h + r, h = s[n] p, e = x from x[0] = 0.

    ``slopes`` and ``r`` broadcast over leading batch axes; time is the last axis.
    """
    slopes, r = np.broadcast_arrays(np.asarray(slopes, float), np.asarray(r, float))
    N = r.shape[-1]
    x = np.zeros(r.shape[:-1] + (N + 1,))
    p = np.empty_like(r)
    h = np.empty_like(r)
    for n in range(N):
        s = slopes[..., n]
        p[..., n] = (x[..., n] + r[..., n]) / (1.0 + s)
        h[..., n] = s * p[..., n]
        x[..., n + 1] = h[..., n]
    return LoopTrace(x=x, p=p, h=h, e=x[..., :N].copy(), r=r, slopes=slopes)


class Block(enum.Enum):
    CURRENT_UNITLESS = "CurrentUnitless"
    VOLTAGE_LTV = "VoltageLtv"


@dataclass(frozen=True)
class EnsembleSpec:
    n_trials: int = 100
    length: int = 10_000
    input_kind: str = "uniform"        # "uniform" or "sinusoid"
    frequency: float = 0.5             # cycles per sample, sinusoid only
    sector: Optional[SectorBound] = None
    schedule: str = "random"           # "random", "constant" or "alternating"
    slope: Optional[float] = None      # for "constant"


def _inputs(spec: EnsembleSpec, rng, shape):
    if spec.input_kind == "uniform":
        return rng.uniform(-1.0, 1.0, size=shape)
    if spec.input_kind == "sinusoid":
        n = np.arange(shape[-1])
        phase = rng.uniform(0, 2 * np.pi, size=shape[:-1] + (1,))
        return np.cos(2 * np.pi * spec.frequency * n + phase * (spec.frequency not in (0.0, 0.5)))
    raise ValueError(f"unknown input kind {spec.input_kind!r}")


def ensemble_gains(block: Block, params: Optional[ConverterParams], spec: EnsembleSpec,
                   seed: int) -> np.ndarray:
    """Per-trial ratio ||output||_2 / ||input||_2 from zero initial state."""
    rng = np.random.default_rng(seed)
    T, N = spec.n_trials, spec.length
    if block is Block.CURRENT_UNITLESS:
        r = _inputs(spec, rng, (T, N))
        if spec.schedule == "constant":
            s = spec.slope if spec.slope is not None else spec.sector.alpha_hat
            slopes = np.full((T, N), float(s))
        elif spec.schedule == "alternating":
            a, b = spec.sector.alpha_hat, spec.sector.beta_hat
            slopes = np.where(np.arange(N) % 2 == 0, a, b) * np.ones((T, 1))
        else:
            sec = spec.sector or SectorBound(0.0, 0.0)
            slopes = rng.uniform(sec.alpha_hat, sec.beta_hat, size=(T, N))
        energy = np.sum(r ** 2, axis=-1)
        if np.any(energy == 0):
            raise ValueError("zero-energy input")
        out = simulate_unitless_loop(slopes, r).e
        return np.sqrt(np.sum(out ** 2, axis=-1) / energy)

    if block is Block.VOLTAGE_LTV:
        if params is None:
            raise ValueError("voltage block needs converter parameters")
        i = _inputs(spec, rng, (T, N + 1))
        t_off = rng.uniform(params.t_var_min, params.t_var_max, size=(T, N))
        co = ltv_coefficients(params, t_off, check_bounds=False)
        energy = np.sum(i ** 2, axis=-1)
        if np.any(energy == 0):
            raise ValueError("zero-energy input")
        v = np.zeros((T, N + 1))
        for n in range(N):
            v[:, n + 1] = (co.alpha_n[:, n] * v[:, n] + co.beta_n[:, n] * i[:, n]
                           + co.gamma_n[:, n] * i[:, n + 1])
        return np.sqrt(np.sum(v ** 2, axis=-1) / energy)
    raise ValueError(f"unknown block {block!r}")


def estimate_l2_gain(block: Block, params: Optional[ConverterParams], spec: EnsembleSpec,
                     seed: int = 0) -> float:
    return float(np.max(ensemble_gains(block, params, spec, seed)))


def schedule_gains(sectors: Sequence[SectorBound], n_trials: int, length: int,
                   seed: int) -> np.ndarray:
    """Largest ||e|| / ||r|| per sector over random slope schedules.

    Slopes are drawn uniformly from each sector every step. Even trials use
    the input (-1)^n and odd trials a constant input, the two frequencies at
    which a constant slope resonates. Energies accumulate on the fly so that
    long runs over many sectors need no trace storage.
    """
    rng = np.random.default_rng(seed)
    lo = np.array([s.alpha_hat for s in sectors])[:, None]
    hi = np.array([s.beta_hat for s in sectors])[:, None]
    shape = (len(sectors), n_trials)
    alt = (np.arange(n_trials) % 2 == 0)[None, :]
    x = np.zeros(shape)
    e2 = np.zeros(shape)
    for n in range(length):
        s = lo + (hi - lo) * rng.random(shape)
        r = np.where(alt, (-1.0) ** n, 1.0)
        e2 += x * x
        x = s * (x + r) / (1.0 + s)
    return np.sqrt(e2.max(axis=1) / length)


def ensemble_csv(seeds: Sequence[int], gains: Sequence[float]) -> str:
    lines = ["seed,gain"] + [f"{s},{g:.10e}" for s, g in zip(seeds, gains)]
    return "\n".join(lines) + "\n"


def dissipation_residuals(loop: LoopTrace, cert: GainCertificate, sector: SectorBound) -> np.ndarray:
    """Per-step V(x+) - V(x) + e^2 - gamma^2 r^2 + lam (h - a p)(b p - h)."""
    P = cert.P_scalar
    a, b = sector.alpha_hat, sector.beta_hat
    x = loop.x
    return (P * x[..., 1:] ** 2 - P * x[..., :-1] ** 2 + loop.e ** 2
            - cert.gamma_hat ** 2 * loop.r ** 2
            + cert.lambda_mult * (loop.h - a * loop.p) * (b * loop.p - loop.h))


def dissipation_check(loop: LoopTrace, cert: GainCertificate, sector: SectorBound,
                      tol: Optional[float] = None) -> bool:
    if tol is None:
        tol = 1e-8 * (1.0 + cert.P_scalar)
    return bool(np.all(dissipation_residuals(loop, cert, sector) <= tol))


# -- charge-balance cross-check ------------------------------------------

def charge_balance_step(params: ConverterParams, i_tilde: float, v_tilde: float, t_off: float):
    """Next (v_tilde, i_tilde) assembled from the per-interval capacitor charges.

    Works with absolute currents and voltages: the charge delivered over the
    tail of the on-time, the off-time and the head of the next on-time, minus
    the load charge. The next valley follows from the ramp geometry.
    """
    eq = compute_equilibrium(params)
    t_on, lam, L = params.t_fixed, params.lam, params.L
    v = params.v_out + v_tilde
    i_p = eq.i_valley + i_tilde
    m1 = (params.v_in - v) / L
    m2 = v / L
    i_next = i_p + m1 * t_on - m2 * t_off
    q1 = (i_p + 0.5 * (1 + lam) * m1 * t_on) * (1 - lam) * t_on
    q2 = 0.5 * (i_p + m1 * t_on + i_next) * t_off
    q3 = (i_next + 0.5 * lam * m1 * t_on) * lam * t_on
    q_out = v / params.R * (t_on + t_off)
    v_next = v + (q1 + q2 + q3 - q_out) / params.C
    return v_next - params.v_out, i_next - eq.i_valley


def translated_charge_step(params: ConverterParams, i_tilde: float, v_tilde: float, t_off: float):
    """Same step from the deviation-form charges around the equilibrium."""
    eq = compute_equilibrium(params)
    t_on, lam, L, R, C = params.t_fixed, params.lam, params.L, params.R, params.C
    V = params.v_out
    dt = t_off - eq.t_var_ss
    i_next = i_tilde - v_tilde * (t_on + eq.t_var_ss) / L - (V + v_tilde) * dt / L
    M1 = (params.v_in - V) / L
    q1 = (1 - lam) * t_on * i_tilde - 0.5 * (1 - lam ** 2) * v_tilde / L * t_on ** 2
    q2 = (0.5 * (i_tilde - v_tilde / L * t_on + i_next) * t_off
          + (eq.i_valley + 0.5 * M1 * t_on) * dt)
    q3 = lam * t_on * i_next - 0.5 * lam ** 2 * v_tilde / L * t_on ** 2
    q_out = v_tilde / R * (t_on + t_off) + V / R * dt
    return v_tilde + (q1 + q2 + q3 - q_out) / C, i_next


def ltv_step(params: ConverterParams, i_tilde: float, v_tilde: float, t_off: float):
    """Next (v_tilde, i_tilde) from the linear time-varying voltage map."""
    eq = compute_equilibrium(params)
    i_next = (i_tilde - v_tilde * (params.t_fixed + eq.t_var_ss) / params.L
              - (params.v_out + v_tilde) * (t_off - eq.t_var_ss) / params.L)
    co = ltv_coefficients(params, t_off, check_bounds=False)
    return co.alpha_n * v_tilde + co.beta_n * i_tilde + co.gamma_n * i_next, i_next
