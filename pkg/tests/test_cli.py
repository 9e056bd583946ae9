import csv
import json

import pytest

import mmladder.cli as cli
from mmladder import ConvergenceError
from mmladder.simulator import generate_tape
from mmladder.tape import write_trades

from conftest import BASE


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "params.json"
    path.write_text(json.dumps(BASE))
    return str(path)


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_quotes_terminal_row(capsys, cfg):
    code, out, _ = run(capsys, "quotes", "--config", cfg, "--t-grid", "0:600:300")
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert len(rows) == 3 * 61
    assert float(rows[-2]["delta_b"]) == pytest.approx(3.2789822822990873, abs=1e-12)


def test_flags_override_file_and_env(capsys, cfg, monkeypatch):
    monkeypatch.setenv(cli.CONFIG_ENV, cfg)
    code, out, _ = run(capsys, "asymptotic", "--Q", 5)
    assert code == 0
    assert len(out.splitlines()) == 1 + 11


def test_usage_errors_exit_one(capsys, cfg):
    code, _, err = run(capsys, "quotes", "--config", cfg, "--bogus")
    assert code == 1 and "usage" in err
    code, _, _ = run(capsys, "quotes", "--config", cfg, "--t-grid", "0:600")
    assert code == 1
    assert run(capsys, "frobnicate")[0] == 1


def test_domain_errors_exit_two(capsys, cfg, tmp_path):
    code, _, err = run(capsys, "quotes", "--config", cfg, "--sigma", -1)
    assert code == 2
    assert json.loads(err.strip().splitlines()[-1])["field"] == "sigma"
    assert run(capsys, "quotes", "--config", str(tmp_path / "missing.json"))[0] == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,price,size\n0,1,-1\n")
    assert run(capsys, "calibrate", "--trades", bad)[0] == 2


def test_convergence_failure_exits_three(capsys, cfg, monkeypatch):
    def boom(matrix):
        raise ConvergenceError("no convergence", matrix.dim, 50 * matrix.dim)

    monkeypatch.setattr(cli, "asymptotic_quotes", lambda m: boom(m))
    assert run(capsys, "asymptotic", "--config", cfg)[0] == 3


def test_simulate_is_reproducible_and_rerunnable(capsys, cfg, tmp_path):
    a, b, c = (str(tmp_path / n) for n in ("a.json", "b.json", "c.json"))
    args = ["simulate", "--config", cfg, "--T", 30, "--n-paths", 20, "--dt", 0.1, "--seed", 7]
    assert run(capsys, *args, "--out", a)[0] == 0
    assert run(capsys, *args, "--out", b)[0] == 0
    assert open(a).read() == open(b).read()
    manifest = json.load(open(a + ".manifest.json"))
    assert manifest["seed"] == 7 and manifest["command"] == "simulate"
    assert run(capsys, "rerun", a + ".manifest.json", "--out", c)[0] == 0
    assert open(c).read() == open(a).read()


def test_rerun_rejects_foreign_json(capsys, tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"command": "quotes", "config": {}}))
    assert run(capsys, "rerun", path)[0] == 2


def test_backtest_and_calibrate(capsys, cfg, tmp_path):
    from mmladder import ModelParams

    tape = tmp_path / "tape.csv"
    with open(tape, "w") as fh:
        write_trades(generate_tape(ModelParams(**BASE), 1200.0, seed=1), fh)
    code, out, _ = run(capsys, "backtest", "--config", cfg, "--trades", tape, "--baseline")
    assert code == 0
    payload = json.loads(out)
    assert set(payload["summary"]) == set(payload["baseline"]["summary"])
    code, out, _ = run(capsys, "calibrate", "--trades", tape)
    assert code == 0 and set(json.loads(out)) >= {"sigma", "A", "k"}


def test_statics_and_approx(capsys, cfg):
    code, out, _ = run(capsys, "statics", "--config", cfg, "--q", -5, 0, 5)
    assert code == 0 and out.startswith("parameter,q,quantity")
    code, out, _ = run(capsys, "approx", "--config", cfg, "--t", 590)
    assert code == 0 and len(out.splitlines()) == 62
