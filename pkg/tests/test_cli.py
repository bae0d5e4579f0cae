import json

import pytest
from click.testing import CliRunner

from accelcert.cli import RunConfig, main, parse_range


@pytest.fixture
def runner():
    return CliRunner()


def test_run_fgm_csv(runner, tmp_path):
    out = tmp_path / "r.csv"
    res = runner.invoke(main, ["run", "--method", "fgm", "--problem", "quad-diag-10", "--n", "50", "-o", str(out)])
    assert res.exit_code == 0, res.output
    lines = out.read_text().split("\n")
    assert lines[0] == "k,f_gap,grad_norm_sq,Lk,jump_flag,observed,bound,slack"
    assert len([ln for ln in lines[1:] if ln]) == 51


def test_run_precondition_exit_2(runner):
    assert runner.invoke(main, ["run", "--method", "obl-g-flat", "--n", "2"]).exit_code == 2


def test_run_at_minimizer(runner):
    res = runner.invoke(main, ["run", "--method", "gd", "--problem", "quad-1d", "--n", "1", "--x0", "at-minimizer"])
    assert res.exit_code == 0
    rows = [ln.split(",") for ln in res.output.strip().split("\n")[1:]]
    assert all(float(r[1]) == 0.0 for r in rows)


@pytest.mark.parametrize("method", ["orc-f", "obl-f", "obl-g", "fgm-bl", "ogm-g", "fgm-rc"])
def test_run_other_methods(runner, method):
    res = runner.invoke(main, ["run", "--method", method, "--n", "12", "--format", "json"])
    assert res.exit_code == 0, res.output
    d = json.loads(res.output)
    assert d["config"]["method"] == method


def test_config_file_and_override(runner, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"method": "fgm", "problem": "huber-1d", "n": 7}))
    res = runner.invoke(main, ["run", "--config", str(cfg), "--n", "9"])
    assert res.exit_code == 0
    assert len(res.output.strip().split("\n")) == 11
    cfg.write_text(json.dumps({"bogus": 1}))
    assert runner.invoke(main, ["run", "--config", str(cfg)]).exit_code == 2


def test_certify(runner, tmp_path):
    out = tmp_path / "c.json"
    res = runner.invoke(main, ["certify", "--method", "orc-f-flat", "--n", "1..25", "-o", str(out)])
    assert res.exit_code == 0
    d = json.loads(out.read_text())
    assert len(d["reports"]) == 25 and all(r["ok"] for r in d["reports"])


def test_certify_fgm_tau(runner):
    res = runner.invoke(main, ["certify", "--method", "fgm", "--n", "1"])
    d = json.loads(res.output)
    assert d["reports"][0]["tau"] == pytest.approx(1 / (2 * 1.6180339887498948 ** 2), rel=1e-14)


def test_certify_unknown(runner):
    assert runner.invoke(main, ["certify", "--method", "gd"]).exit_code == 2


def test_verify_lyapunov(runner):
    res = runner.invoke(main, ["verify-lyapunov", "--method", "obl-f-flat", "--n", "30"])
    assert res.exit_code == 0
    d = json.loads(res.stdout)
    assert d["max_identity_residual"] <= 1e-9


def test_verify_orc_f_seeds(runner):
    res = runner.invoke(main, ["verify-lyapunov", "--method", "orc-f", "--problem", "quad-diag-10",
                               "--seeds", "100", "--n", "15"])
    assert res.exit_code == 0
    assert json.loads(res.stdout)["min_expected_decrement"] >= -1e-10


def test_verify_zero_horizon(runner):
    assert runner.invoke(main, ["verify-lyapunov", "--method", "fgm", "--n", "0"]).exit_code == 2


def test_env_tolerance_violation(runner):
    # an impossible tolerance turns rounding-level residuals into failures
    res = runner.invoke(main, ["verify-lyapunov", "--method", "ogm", "--n", "20", "--seeds", "2"],
                        env={"ACCEL_CERT_TOL": "1e-30"})
    assert res.exit_code == 1
    assert runner.invoke(main, ["verify-lyapunov", "--method", "fgm"],
                         env={"ACCEL_CERT_TOL": "abc"}).exit_code == 2


def test_sweep_jobs(runner):
    res = runner.invoke(main, ["sweep", "--method", "fgm", "--n", "1..6", "--jobs", "2"])
    assert res.exit_code == 0
    lines = res.output.strip().split("\n")
    assert lines[0].startswith("N,") and len(lines) == 7


def test_lists(runner):
    assert "orc-f-flat" in runner.invoke(main, ["list-methods"]).output
    assert "quad-diag-10" in runner.invoke(main, ["list-problems"]).output


def test_parse_range():
    assert parse_range("3") == [3] and parse_range("2..4") == [2, 3, 4]


def test_deterministic_report(runner):
    a = runner.invoke(main, ["run", "--method", "orc-f", "--n", "10", "--seed", "3"]).output
    b = runner.invoke(main, ["run", "--method", "orc-f", "--n", "10", "--seed", "3"]).output
    assert a == b
