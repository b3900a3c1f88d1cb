"""Batch command-line front end.

    cyclecert equilibrium run.cfg
    cyclecert gain-surface run.cfg --out results/
    cyclecert certify run.cfg
    cyclecert max-sector run.cfg
    cyclecert simulate run.cfg --out results/
    cyclecert validate-tables

Exit codes: 0 certified, stable or success; 1 not certified or not stable;
2 configuration or solver error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .converter import compute_equilibrium, derived_constants, table1_buck, validate_class_sigma
from .criteria import (Verdict, boost_off_time_criterion, buck_threshold, certify_buck,
                       max_stable_sector)
from .lure import InfeasibleError, SectorBound, certify_gain, gain_surface, unitless_current_block
from .simulator import InterferenceModel, Stability, classify_stability, run_transient

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
COMMANDS = ("equilibrium", "gain-surface", "certify", "max-sector", "simulate", "validate-tables")

# expected rows for the two design cases: (R, a, threshold, a*, simulated verdict)
TABLE_CASES = (
    (0.4, 0.48, 1.19, 0.24, Stability.UNSTABLE),
    (0.05, 0.3, 8.89, 0.44, Stability.STABLE),
)
A_STAR_TOL = 0.03
THRESHOLD_TOL = 0.01


def _e(x) -> str:
    return f"{x:.10e}" if isinstance(x, float) and math.isfinite(x) else str(x)


def _emit(text: str, out_dir: Optional[Path], name: str, stdout) -> None:
    if out_dir is None:
        stdout.write(text)
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text)
    stdout.write(f"wrote {out_dir / name}\n")


def cmd_equilibrium(cfg: RunConfig, out_dir, stdout) -> int:
    params = cfg.converter_params()
    eq = compute_equilibrium(params)
    dc = derived_constants(params)
    rep = validate_class_sigma(params, cfg["assumption_threshold"])
    rows = [
        ("i_valley_A", eq.i_valley if eq.i_valley is not None else ""),
        ("t_var_ss_s", eq.t_var_ss), ("t_s_ss_s", eq.t_s_ss),
        ("tau1_s", dc.tau1), ("tau2_s", dc.tau2),
        ("t_s_min_s", dc.t_s_min), ("t_s_max_s", dc.t_s_max),
        ("assumptions.ratio_rc", rep.ratio_rc), ("assumptions.ratio_ripple", rep.ratio_ripple),
        ("assumptions.threshold", rep.threshold),
        ("assumptions.pass", "true" if rep.passed else "false"),
    ]
    stdout.write("".join(f"{k} = {_e(v)}\n" for k, v in rows))
    return EXIT_OK


def cmd_gain_surface(cfg: RunConfig, out_dir, stdout) -> int:
    n = cfg["grid_n"]
    alpha = np.linspace(cfg["grid_alpha_min"], cfg["grid_alpha_max"], n)
    beta = np.linspace(cfg["grid_beta_min"], cfg["grid_beta_max"], n)
    surf = gain_surface(unitless_current_block(), alpha, beta, cfg["gain_tol"], cfg["gain_ceiling"])
    _emit(surf.to_csv(), out_dir, "gain_surface.csv", stdout)
    return EXIT_OK


def cmd_certify(cfg: RunConfig, out_dir, stdout) -> int:
    params = cfg.converter_params()
    sector = cfg.sector()
    if params.is_buck:
        report = certify_buck(params, sector, cfg["gain_tol"],
                              assumption_threshold=cfg["assumption_threshold"])
    else:
        gamma = certify_gain(unitless_current_block(), sector, cfg["gain_tol"],
                             cfg["gain_ceiling"]).gamma_hat
        report = boost_off_time_criterion(params, sector, gamma, cfg["case_ii_variant"],
                                          cfg["assumption_threshold"])
    text = report.to_text()
    stdout.write(text)
    if out_dir is not None:
        _emit(report.csv_header() + "\n" + report.csv_row() + "\n", out_dir, "certify.csv", stdout)
    return EXIT_OK if report.verdict is Verdict.CERTIFIED else EXIT_FAIL


def cmd_max_sector(cfg: RunConfig, out_dir, stdout) -> int:
    params = cfg.converter_params()
    a = max_stable_sector(params, cfg["sector_tol"], min(cfg["gain_tol"], 1e-5))
    stdout.write(f"a_star = {a:.10e}\nthreshold = {buck_threshold(params):.10e}\n")
    return EXIT_OK


def _interference(cfg: RunConfig, n_cycles: int) -> InterferenceModel:
    kind = cfg["interference"]
    if kind == "none":
        return InterferenceModel.none()
    if kind == "sinusoid":
        return InterferenceModel.sinusoid(cfg["sin_amplitude"], cfg["sin_period"], cfg["sin_phase"])
    sector = cfg.sector()
    if kind == "alternating":
        return InterferenceModel.schedule([sector.alpha_hat, sector.beta_hat], sector)
    if kind == "constant":
        s = cfg.get("slope", sector.alpha_hat)
        return InterferenceModel.schedule([s], sector)
    rng = np.random.default_rng(cfg["seed"])
    return InterferenceModel.random_schedule(sector, n_cycles, rng)


def cmd_simulate(cfg: RunConfig, out_dir, stdout) -> int:
    params = cfg.converter_params()
    n = cfg["n_cycles"]
    trace = run_transient(params, _interference(cfg, n), cfg["i_cmd_step"], n)
    verdict = classify_stability(trace, cfg["settle_window"], cfg["settle_tol"], cfg["growth_factor"])
    _emit(trace.to_csv(), out_dir, "trace.csv", stdout)
    stdout.write(verdict.to_text())
    return EXIT_OK if verdict.classification is Stability.STABLE else EXIT_FAIL


def validate_tables(n_cycles: int = 5000, sector_tol: float = 1e-3):
    """Run both design cases end to end; returns a list of row dicts."""
    rows = []
    for R, a, thr_exp, a_exp, sim_exp in TABLE_CASES:
        params = table1_buck(R)
        degenerate = params.with_degenerate_timing()
        thr = buck_threshold(degenerate)
        a_star = max_stable_sector(degenerate, sector_tol)
        cert = certify_buck(degenerate, SectorBound.symmetric(a))
        trace = run_transient(params, InterferenceModel.alternating(a), 1.0, n_cycles)
        sim = classify_stability(trace).classification
        match = (abs(thr - thr_exp) <= THRESHOLD_TOL and abs(a_star - a_exp) <= A_STAR_TOL
                 and sim is sim_exp)
        rows.append(dict(
            R=R, a=a, threshold_expected=thr_exp, threshold_observed=thr,
            a_star_expected=a_exp, a_star_observed=a_star,
            gamma_hat=cert.gamma_hat, certify_verdict=cert.verdict.value,
            sim_expected=sim_exp.value, sim_observed=sim.value, match=match,
        ))
    return rows


def cmd_validate_tables(cfg: RunConfig, out_dir, stdout) -> int:
    rows = validate_tables(cfg["n_cycles"], cfg["sector_tol"])
    keys = list(rows[0])
    lines = [",".join(keys)]
    for r in rows:
        lines.append(",".join(
            ("true" if v else "false") if isinstance(v, bool) else _e(v) for v in r.values()
        ))
    _emit("\n".join(lines) + "\n", out_dir, "validate_tables.csv", stdout)
    if out_dir is not None:
        stdout.write("\n".join(lines) + "\n")
    return EXIT_OK if all(r["match"] for r in rows) else EXIT_FAIL


HANDLERS = {
    "equilibrium": cmd_equilibrium,
    "gain-surface": cmd_gain_surface,
    "certify": cmd_certify,
    "max-sector": cmd_max_sector,
    "simulate": cmd_simulate,
    "validate-tables": cmd_validate_tables,
}


def dispatch(command: str, cfg: RunConfig, out_dir: Optional[Path] = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    cfg.require(command)
    stdout.write(f"# command = {command}\n")
    stdout.write(cfg.echo())
    return HANDLERS[command](cfg, out_dir, stdout)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cyclecert", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("config", nargs="?", help="key = value config file")
    p.add_argument("--out", type=Path, default=None, help="directory for CSV artifacts")
    return p


def main(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text)
        out_dir = args.out or (Path(cfg["out_dir"]) if cfg.get("out_dir") else None)
        return dispatch(args.command, cfg, out_dir, stdout)
    except (ConfigError, OSError, InfeasibleError, ValueError, ArithmeticError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
