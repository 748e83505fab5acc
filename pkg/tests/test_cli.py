"""Command-line contract: artifacts, determinism, output override and exit codes."""

import csv
import json

import pytest

from polybump import cli
from polybump import solver as sv

CONSTRUCTION = """\
[system]
beta = -0.25
k = 2
m = 1
dim = 2
epsilon = 0.1
"""


def _config(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


@pytest.fixture(autouse=True)
def _no_env_out(monkeypatch):
    monkeypatch.delenv("POLYBUMP_OUT", raising=False)


def test_ground_state_dim1_artifacts(tmp_path):
    out = tmp_path / "gs"
    assert cli.main(["ground-state", "--dim", "1", "--mu", "1", "--out", str(out)]) == cli.EXIT_OK
    rows = _rows(out / "ground_state.csv")
    assert rows[0] == ["r", "U", "dU"]
    assert len(rows) == 3002
    assert float(rows[1][1]) == pytest.approx(2 ** 0.5, rel=1e-8)  # sqrt(2 omega / mu) at r = 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["summary"]["sech closed form"]["passed"]
    for name in rep["outputs"]:
        assert (out / name).exists()


def test_csv_uses_crlf(tmp_path):
    out = tmp_path / "gs"
    cli.main(["ground-state", "--dim", "2", "--out", str(out)])
    raw = (out / "ground_state.csv").read_bytes()
    assert raw.count(b"\r\n") == raw.count(b"\n") == 3002


def test_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["ground-state", "--dim", "3", "--out", str(d)]) == 0
    for name in ("ground_state.csv", "ground_state.json", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ra, rb = (json.loads((d / "report.json").read_text()) for d in (a, b))
    assert ra["run_id"] == rb["run_id"]
    # timing lives only in the metadata file
    assert "elapsed_s" in json.loads((a / "metadata.json").read_text())
    assert "elapsed_s" not in (a / "report.json").read_text()


def test_env_overrides_out(tmp_path, monkeypatch):
    target = tmp_path / "env"
    monkeypatch.setenv("POLYBUMP_OUT", str(target))
    assert cli.main(["ground-state", "--out", str(tmp_path / "flag")]) == 0
    assert (target / "report.json").exists()
    assert not (tmp_path / "flag").exists()


def test_balance_sweep_approaches_limit(tmp_path):
    out = tmp_path / "bal"
    assert cli.main(["balance", "--sweep", "--out", str(out)]) == 0
    rows = _rows(out / "balance.csv")
    assert rows[0] == ["eps", "t", "rho", "d_eff", "d_limit", "ratio"]
    gaps = [abs(float(r[5]) - 1) for r in rows[1:]]
    assert len(gaps) == len(cli.BALANCE_EPS)
    assert all(x > y for x, y in zip(gaps, gaps[1:]))


def test_jobs_do_not_change_results(tmp_path):
    cfg = _config(tmp_path, CONSTRUCTION)
    outs = []
    for j in (1, 2):
        out = tmp_path / f"j{j}"
        code = cli.main(["errors", "--quick", "--config", str(cfg), "--eps", "0.1,0.08",
                         "--jobs", str(j), "--out", str(out)])
        assert code == 0
        outs.append((out / "errors.csv").read_bytes())
    assert outs[0] == outs[1]


def test_unknown_subcommand_is_usage_error():
    assert cli.main(["no-such-command"]) == cli.EXIT_CONFIG


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == cli.EXIT_OK


def test_unknown_config_key(tmp_path):
    cfg = _config(tmp_path, CONSTRUCTION + "bogus = 1\n")
    assert cli.main(["shadow", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_positive_beta_rejected_for_construction(tmp_path):
    cfg = _config(tmp_path, CONSTRUCTION.replace("-0.25", "0.5"))
    assert cli.main(["corrections", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_bad_eps_list(tmp_path):
    assert cli.main(["balance", "--eps", "0.1,abc", "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_sign_condition_violation_exit_code(tmp_path):
    # W with a minimum at the origin flips the sign of Delta omega(0)
    text = CONSTRUCTION + '\n[potential.W]\nkind = "gaussian-bump"\nparameters = [3.0, -2.0, 0.5]\n'
    cfg = _config(tmp_path, text)
    code = cli.main(["reduce", "--quick", "--config", str(cfg), "--eps", "0.1", "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_HYPOTHESIS


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def boom(ctx):
        raise sv.NewtonError("no convergence")

    monkeypatch.setitem(cli.COMMANDS, "solve", boom)
    assert cli.main(["solve", "--out", str(tmp_path / "o")]) == cli.EXIT_NUMERICAL


def test_failed_check_exit_code(tmp_path, monkeypatch):
    def failing(ctx):
        ctx.bundle.check("always false", False, "forced")

    monkeypatch.setitem(cli.COMMANDS, "shadow", failing)
    out = tmp_path / "o"
    assert cli.main(["shadow", "--out", str(out)]) == cli.EXIT_NUMERICAL
    rep = json.loads((out / "report.json").read_text())
    assert rep["summary"]["always false"]["passed"] is False
