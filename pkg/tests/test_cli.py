import io

import pytest
from hypothesis import given, strategies as st

from cyclecert.cli import main
from cyclecert.config import (BadUnit, InvalidValue, MissingKey, UnknownKey, parse_config,
                              parse_si, table1_config_text)


def run(tmp_path, text, *args):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    out, err = io.StringIO(), io.StringIO()
    code = main([args[0], str(cfg), *args[1:]], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def report_value(text, key):
    for line in text.splitlines():
        if line.startswith(f"{key} = "):
            return line.split(" = ", 1)[1]
    raise KeyError(key)


@pytest.mark.parametrize("text, unit, value", [
    ("240n", "H", 2.4e-7), ("240nH", "H", 2.4e-7), ("100u", "F", 1e-4), ("100µF", "F", 1e-4),
    ("12", "V", 12.0), ("0.05", "Ohm", 0.05), ("1.5k", "", 1500.0), ("2m", "", 2e-3),
    ("1e-7", "s", 1e-7), ("3p", "", 3e-12),
])
def test_parse_si(text, unit, value):
    assert parse_si(text, unit) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("text", ["240x", "10 q", "5nn"])
def test_bad_unit(text):
    with pytest.raises(BadUnit):
        parse_si(text, "H")


@given(st.floats(1e-3, 1e3), st.sampled_from(["p", "n", "u", "m", "k", ""]))
def test_parse_si_roundtrip(x, prefix):
    scale = {"p": 1e-12, "n": 1e-9, "u": 1e-6, "m": 1e-3, "k": 1e3, "": 1.0}[prefix]
    assert parse_si(f"{x!r}{prefix}") == pytest.approx(x * scale, rel=1e-14)


def test_parse_config_values_and_aliases():
    cfg = parse_config(table1_config_text(0.4) + "R_s = 10m  # sense gain\n")
    assert cfg["L"] == pytest.approx(2.4e-7)
    assert cfg["T_fixed"] == pytest.approx(1e-7)
    assert cfg["lambda"] == 0.5
    assert cfg.converter_params().R == 0.4


def test_unknown_key_names_line():
    with pytest.raises(UnknownKey) as exc:
        parse_config("V_in = 12\nfoo = 3\n")
    assert exc.value.line == 2 and "line 2" in str(exc.value)


def test_bad_unit_names_line():
    with pytest.raises(BadUnit) as exc:
        parse_config("# header\nL = 240z\n")
    assert exc.value.line == 2


def test_lambda_out_of_range():
    with pytest.raises(InvalidValue):
        parse_config("lambda = 1.5\n")


def test_missing_key_for_simulate():
    cfg = parse_config(table1_config_text(0.4).replace("C = 100u\n", ""))
    with pytest.raises(MissingKey) as exc:
        cfg.require("simulate")
    assert exc.value.key == "C"


def test_duplicate_key_rejected():
    with pytest.raises(InvalidValue):
        parse_config("R = 1\nR = 2\n")


def test_missing_key_exit_code(tmp_path):
    code, _, err = run(tmp_path, table1_config_text(0.4).replace("C = 100u\n", ""), "simulate")
    assert code == 2 and "'C'" in err


def test_equilibrium_command(tmp_path):
    code, out, _ = run(tmp_path, table1_config_text(0.4), "equilibrium")
    assert code == 0
    assert float(report_value(out, "t_var_ss_s")) == pytest.approx(9.8 / 2.2 * 100e-9, rel=1e-9)
    assert float(report_value(out, "i_valley_A")) == pytest.approx(3.458, abs=1e-3)
    assert "# L = 2.4000000000e-07" in out


def test_certify_case2_exit_zero(tmp_path):
    text = table1_config_text(0.05, -0.3, 0.3) + "degenerate_timing = true\n"
    code, out, _ = run(tmp_path, text, "certify")
    assert code == 0
    assert float(report_value(out, "gain.rhs")) == pytest.approx(8.89, abs=0.005)
    assert report_value(out, "verdict") == "Certified"


def test_certify_case1_exit_one(tmp_path):
    code, out, _ = run(tmp_path, table1_config_text(0.4, -0.48, 0.48), "certify")
    assert code == 1
    assert report_value(out, "verdict") == "NotCertified"


def test_certify_writes_csv(tmp_path):
    code, out, _ = run(tmp_path, table1_config_text(0.4, -0.1, 0.1), "certify", "--out",
                       str(tmp_path / "o"))
    rows = (tmp_path / "o" / "certify.csv").read_text().splitlines()
    assert code == 0 and len(rows) == 2
    assert rows[0].startswith("verdict,param.topology")


def test_boost_certify(tmp_path):
    text = ("topology = BoostConstOff\nV_in = 5\nV_out = 12\nL = 480n\nC = 100u\nR = 2\n"
            "T_off = 100n\ndegenerate_timing = true\nalpha_hat = -0.3\nbeta_hat = 0.3\n")
    code, out, _ = run(tmp_path, text, "certify")
    assert code == 0
    assert report_value(out, "branch") == "CaseI"
    assert float(report_value(out, "gain.rhs")) == pytest.approx(5.3)


def test_gain_surface_with_zero_cell(tmp_path):
    text = ("grid_n = 2\ngrid_alpha_min = -0.2\ngrid_alpha_max = 0\n"
            "grid_beta_min = 0\ngrid_beta_max = 0.2\n")
    code, out, _ = run(tmp_path, text, "gain-surface", "--out", str(tmp_path / "o"))
    assert code == 0
    rows = (tmp_path / "o" / "gain_surface.csv").read_text().strip().splitlines()
    assert rows[0] == "alpha_hat,beta_hat,gamma_hat" and len(rows) == 5
    zero = [r for r in rows[1:] if r.startswith("0.0000000000e+00,0.0000000000e+00,")]
    assert len(zero) == 1
    assert float(zero[0].split(",")[2]) <= 1e-4


def test_simulate_is_deterministic(tmp_path):
    text = table1_config_text(0.4, -0.3, 0.3) + "interference = random\nseed = 9\nn_cycles = 1500\n"
    outs = []
    for k in range(2):
        code, out, _ = run(tmp_path, text, "simulate", "--out", str(tmp_path / f"o{k}"))
        assert code == 0 and "classification = Stable" in out
        outs.append((tmp_path / f"o{k}" / "trace.csv").read_bytes())
    assert outs[0] == outs[1]


def test_max_sector_command(tmp_path):
    text = table1_config_text(0.4) + "degenerate_timing = true\nsector_tol = 1e-2\n"
    code, out, _ = run(tmp_path, text, "max-sector")
    assert code == 0
    assert float(report_value(out, "a_star")) == pytest.approx(0.352, abs=0.01)


def test_config_echo_lists_defaults():
    echo = parse_config("").echo()
    assert "# gain_tol = 1.0000000000e-04" in echo
    assert "# n_cycles = 5000" in echo
