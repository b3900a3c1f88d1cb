import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cyclecert.converter import compute_equilibrium, table1_buck
from cyclecert.lure import SectorBound, certify_gain, lti_lower_bound_oracle, unitless_current_block
from cyclecert.simulator import (Block, CycleState, EnsembleSpec, InterferenceModel,
                                 NonMonotoneResidualWarning, Stability, TransientTrace,
                                 charge_balance_step, classify_stability, dissipation_check,
                                 dissipation_residuals, ensemble_csv, ensemble_gains,
                                 estimate_l2_gain, ltv_step, operating_point, run_transient,
                                 simulate_unitless_loop, solve_off_time, step_cycle,
                                 translated_charge_step)
from cyclecert.voltage import voltage_block_gain_bound

P04 = table1_buck(0.4)
T_OFF = compute_equilibrium(P04).t_var_ss
ZERO = CycleState(0, 0.0, 0.0, T_OFF)


def fake_trace(i):
    n = len(i)
    z = np.zeros(n)
    return TransientTrace(n=np.arange(n), i_tilde=np.asarray(i, float), v_tilde=z, t_off=z, q=z,
                          clamped=np.zeros(n, bool), params=P04)


def test_equilibrium_off_time():
    t, clamped = solve_off_time(ZERO, P04, InterferenceModel.none(), 0.0)
    assert t == pytest.approx(T_OFF, rel=1e-14)
    assert not clamped


def test_off_time_with_raised_voltage():
    # ramp geometry: (12 - 2.42) / L * T_on == 2.42 / L * t_off
    state = CycleState(0, 0.0, 0.22, T_OFF)
    t, _ = solve_off_time(state, P04, InterferenceModel.none(), 0.0)
    m1 = (12 - 2.42) / 240e-9
    m2 = 2.42 / 240e-9
    assert t == pytest.approx(m1 * 100e-9 / m2, rel=1e-12)
    assert t == pytest.approx(395.9e-9, abs=0.1e-9)


def test_off_time_clamped_to_upper_bound():
    p = table1_buck(0.4, t_var_min=300e-9, t_var_max=600e-9)
    # a current excess of (700 - 445.45) ns * 2.2 V / 240 nH pushes the root to 700 ns
    di = (700e-9 - T_OFF) * 2.2 / 240e-9
    state = CycleState(0, di, 0.0, T_OFF)
    t, clamped = solve_off_time(state, p, InterferenceModel.none(), 0.0)
    assert (t, clamped) == (600e-9, True)
    t, clamped = solve_off_time(CycleState(0, -di, 0.0, T_OFF), p, InterferenceModel.none(), 0.0)
    assert (t, clamped) == (300e-9, True)


def test_equilibrium_is_fixed_point():
    nxt = step_cycle(ZERO, P04, InterferenceModel.none(), 0.0)
    assert nxt.i_tilde == pytest.approx(0.0, abs=1e-12)
    assert nxt.v_tilde == pytest.approx(0.0, abs=1e-15)
    assert nxt.t_off == pytest.approx(T_OFF, rel=1e-14)


def test_unit_current_excess_step():
    nxt = step_cycle(CycleState(0, 1.0, 0.0, T_OFF), P04, InterferenceModel.none(), 0.0)
    assert nxt.i_tilde == pytest.approx(0.0, abs=1e-9)
    assert nxt.t_off - T_OFF == pytest.approx(240e-9 / 2.2, rel=1e-9)
    assert nxt.v_tilde == pytest.approx(3.273e-3, abs=1e-6)
    # cross-check with the charge assembly
    v_cb, i_cb = charge_balance_step(P04, 1.0, 0.0, nxt.t_off)
    assert v_cb == pytest.approx(nxt.v_tilde, rel=1e-9)


def test_zero_sector_schedule_matches_no_interference():
    a = run_transient(P04, InterferenceModel.alternating(0.0), 0.7, 300)
    b = run_transient(P04, InterferenceModel.none(), 0.7, 300)
    np.testing.assert_array_equal(a.i_tilde, b.i_tilde)
    np.testing.assert_array_equal(a.v_tilde, b.v_tilde)


@pytest.mark.parametrize("n", [1, 10, 1000])
def test_zero_run_is_all_zero(n):
    tr = run_transient(P04, InterferenceModel.none(), 0.0, n)
    assert len(tr) == n + 1
    assert np.all(np.abs(tr.i_tilde) < 1e-12) and np.all(np.abs(tr.v_tilde) < 1e-14)


def test_trace_settles_to_operating_point():
    tr = run_transient(P04, InterferenceModel.alternating(0.3), 1.0, 3000)
    i_t, v_t, t_t = operating_point(P04, 1.0)
    assert tr.i_tilde[-1] == pytest.approx(i_t, abs=1e-9)
    assert tr.v_tilde[-1] == pytest.approx(v_t, abs=1e-9)
    assert tr.t_off[-1] == pytest.approx(t_t, rel=1e-9)
    # charge balance at the new point: average inductor current equals load current
    v = 2.2 + v_t
    i_v = compute_equilibrium(P04).i_valley + i_t
    assert i_v + 0.5 * (12 - v) / 240e-9 * 100e-9 == pytest.approx(v / 0.4, rel=1e-12)


def test_trace_csv_layout():
    tr = run_transient(P04, InterferenceModel.none(), 0.5, 3)
    lines = tr.to_csv().strip().splitlines()
    assert lines[0] == "n,i_tilde_A,v_tilde_V,t_off_s,clamped"
    assert len(lines) == 5
    assert lines[1].startswith("0,0.0000000000e+00,")


def test_trace_is_deterministic():
    make = lambda: run_transient(P04, InterferenceModel.random_schedule(
        SectorBound.symmetric(0.3), 500, np.random.default_rng(4)), 1.0, 500).to_csv()
    assert make() == make()


def test_divergence_truncates_trace():
    tr = run_transient(P04, InterferenceModel.none(), 0.0, 100, initial=CycleState(0, 5e3, 0.0, T_OFF))
    assert tr.truncated and tr.diverged_at == 1
    assert classify_stability(tr).classification is Stability.UNSTABLE


def test_sinusoid_first_root_and_warning():
    # a large fast ripple makes the comparator residual cross zero repeatedly
    model = InterferenceModel.sinusoid(amplitude=3.0, period=50e-9)
    with pytest.warns(NonMonotoneResidualWarning):
        t, clamped = solve_off_time(ZERO, P04, model, 0.0)
    eq = compute_equilibrium(P04)
    ramp = lambda s: -(2.2 * s - 2.2 * eq.t_var_ss) / 240e-9
    residual = lambda s: ramp(s) + model.w(s) - model.w(eq.t_var_ss)
    assert abs(residual(t)) < 1e-6
    grid = np.linspace(P04.t_var_min, t, 2000)[:-1]
    assert np.all(residual(grid) > 0)


def test_small_sinusoid_is_monotone():
    model = InterferenceModel.sinusoid(amplitude=1e-3, period=10e-6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        tr = run_transient(P04, model, 0.0, 20)
    assert np.all(np.abs(tr.t_off - T_OFF) < 1e-9)


@pytest.mark.parametrize("i", [np.zeros(2000), np.full(2000, 3.0)])
def test_classify_constant_is_stable(i):
    assert classify_stability(fake_trace(i)).classification is Stability.STABLE


def test_classify_geometric_growth_is_unstable():
    i = 1e-30 * 1.1 ** np.arange(600)
    v = classify_stability(fake_trace(i), settle_window=100)
    assert v.classification is Stability.UNSTABLE


def test_classify_persistent_oscillation_is_indeterminate():
    i = (-1.0) ** np.arange(2000)
    assert classify_stability(fake_trace(i)).classification is Stability.INDETERMINATE


def test_classify_rejects_short_trace():
    with pytest.raises(ValueError):
        classify_stability(fake_trace(np.zeros(100)))


def test_schedule_outside_sector_rejected():
    with pytest.raises(ValueError):
        InterferenceModel.schedule([0.5], SectorBound.symmetric(0.3))
    with pytest.raises(ValueError):
        InterferenceModel.schedule([-1.0])


# unitless loop ------------------------------------------------------------

def test_unitless_loop_relations():
    rng = np.random.default_rng(0)
    s = rng.uniform(-0.4, 0.4, 200)
    r = rng.normal(size=200)
    tr = simulate_unitless_loop(s, r)
    np.testing.assert_allclose(tr.p, tr.x[:-1] - tr.h + tr.r, atol=1e-12)
    np.testing.assert_allclose(tr.h, s * tr.p, atol=1e-12)
    np.testing.assert_array_equal(tr.x[1:], tr.h)


@pytest.mark.parametrize("s", [-0.48, -0.3, 0.3, 0.45])
def test_constant_slope_gain_matches_closed_form(s):
    # resonance sits at the Nyquist frequency for negative c and at DC for positive c
    spec = EnsembleSpec(n_trials=1, length=10_000, input_kind="sinusoid",
                        frequency=0.5 if s < 0 else 0.0, schedule="constant", slope=s,
                        sector=SectorBound(min(s, 0), max(s, 0)))
    g = estimate_l2_gain(Block.CURRENT_UNITLESS, None, spec, seed=0)
    assert g == pytest.approx(lti_lower_bound_oracle(spec.sector), rel=0.05)


def test_zero_sector_gain_is_zero():
    spec = EnsembleSpec(n_trials=5, length=500, sector=SectorBound(0.0, 0.0))
    assert estimate_l2_gain(Block.CURRENT_UNITLESS, None, spec, seed=1) == 0.0


def test_ensemble_is_seeded():
    spec = EnsembleSpec(n_trials=4, length=300, sector=SectorBound.symmetric(0.3))
    a = ensemble_gains(Block.CURRENT_UNITLESS, None, spec, 7)
    np.testing.assert_array_equal(a, ensemble_gains(Block.CURRENT_UNITLESS, None, spec, 7))
    csv = ensemble_csv(range(4), a).splitlines()
    assert csv[0] == "seed,gain" and len(csv) == 5


def test_voltage_gain_degenerate_below_dc_bound():
    p = P04.with_degenerate_timing()
    spec = EnsembleSpec(n_trials=20, length=2000)
    g = estimate_l2_gain(Block.VOLTAGE_LTV, p, spec, seed=3)
    assert g <= 0.4 / (1 + 100e-9 / 1.2e-6)


@pytest.mark.parametrize("R", [0.4, 0.05, 1.0])
def test_voltage_gain_never_exceeds_bound(R):
    p = table1_buck(R)
    bound = voltage_block_gain_bound(p).gamma_i_to_v
    for kind, f in (("uniform", 0.5), ("sinusoid", 0.0)):
        spec = EnsembleSpec(n_trials=100, length=2000, input_kind=kind, frequency=f)
        assert np.max(ensemble_gains(Block.VOLTAGE_LTV, p, spec, seed=11)) <= bound


# dissipation ------------------------------------------------------------

SECTOR = SectorBound.symmetric(0.3)
CERT = certify_gain(unitless_current_block(), SECTOR, 1e-5)


def test_dissipation_zero_trajectory_is_equality():
    tr = simulate_unitless_loop(np.zeros(50), np.zeros(50))
    np.testing.assert_array_equal(dissipation_residuals(tr, CERT, SECTOR), 0.0)
    assert dissipation_check(tr, CERT, SECTOR)


def test_dissipation_holds_on_random_trajectories():
    rng = np.random.default_rng(5)
    s = rng.uniform(-0.3, 0.3, size=(100, 1000))
    r = rng.normal(size=(100, 1000))
    assert dissipation_check(simulate_unitless_loop(s, r), CERT, SECTOR)


def test_dissipation_fails_for_halved_gain():
    from dataclasses import replace
    half = replace(CERT, gamma_hat=0.5 * CERT.gamma_hat)
    n = 200
    tr = simulate_unitless_loop(np.full(n, -0.3), (-1.0) ** np.arange(n))
    assert not dissipation_check(tr, half, SECTOR)
    assert np.sum(dissipation_residuals(tr, half, SECTOR)) > 0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-0.3, 0.3), min_size=5, max_size=60), st.integers(0, 2 ** 31))
def test_dissipation_property(slopes, seed):
    r = np.random.default_rng(seed).normal(size=len(slopes))
    assert dissipation_check(simulate_unitless_loop(slopes, r), CERT, SECTOR)


# charge balance ---------------------------------------------------------

@pytest.mark.parametrize("R, lam", [(0.4, 0.5), (0.05, 0.5), (0.4, 0.0), (0.4, 1.0), (2.0, 0.3)])
def test_three_step_formulas_agree(R, lam):
    p = table1_buck(R, lam)
    rng = np.random.default_rng(int(R * 100) + int(lam * 10))
    for _ in range(100):
        i, v = rng.uniform(-2, 2), rng.uniform(-0.2, 0.2)
        t = rng.uniform(p.t_var_min, p.t_var_max)
        v1, i1 = ltv_step(p, i, v, t)
        v2, i2 = charge_balance_step(p, i, v, t)
        v3, i3 = translated_charge_step(p, i, v, t)
        assert v2 == pytest.approx(v1, rel=1e-6, abs=1e-12)
        assert v3 == pytest.approx(v1, rel=1e-6, abs=1e-12)
        assert i2 == pytest.approx(i1, rel=1e-9, abs=1e-9)
        assert i3 == pytest.approx(i1, rel=1e-9, abs=1e-9)
