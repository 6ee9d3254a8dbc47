from __future__ import annotations

import csv
import hashlib
import json

import pytest

from eflh.harness import main
from eflh.scenarios import ScenarioConfig


@pytest.fixture
def scen(tmp_path):
    p = tmp_path / "s.json"
    ScenarioConfig(T=128, n_segments=4, seed=3).dump(p)
    return p


def _digest(d):
    return {f.name: hashlib.sha256(f.read_bytes()).hexdigest() for f in sorted(d.iterdir())}


def test_run_smoke(scen, tmp_path):
    out = tmp_path / "r"
    assert main(["run", "--algo", "ogd", "--scenario", str(scen), "--out", str(out)]) == 0
    assert (out / "trace.csv").exists()
    rep = json.loads((out / "report.json").read_text())
    assert {"config", "static_regret", "sa_table", "dynamic", "oracle_quality", "violations"} <= set(rep)


def test_run_missing_epsilon(scen, tmp_path, capsys):
    assert main(["run", "--algo", "eflh-full", "--scenario", str(scen), "--out", str(tmp_path / "r")]) == 1
    assert "epsilon" in capsys.readouterr().err


def test_usage_errors_exit_one(scen, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--algo", "nope", "--scenario", str(scen), "--out", str(tmp_path)])
    assert exc.value.code == 1
    assert main(["run", "--algo", "ogd", "--scenario", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1


def test_run_twice_identical(scen, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", "--algo", "eflh-basic", "--scenario", str(scen), "--seed", "7", "--out", str(out)]) == 0
    assert _digest(a) == _digest(b)


def test_contract_error_exit_two(scen, tmp_path, monkeypatch):
    from eflh import harness

    def broken(cfg):
        raise harness.ContractError("loss gap exceeds G*D")

    monkeypatch.setattr(harness, "execute", broken)
    assert main(["run", "--algo", "ogd", "--scenario", str(scen), "--out", str(tmp_path / "r")]) == 2


def test_fatal_violation_exit_two(scen, tmp_path, monkeypatch):
    from eflh import harness

    real = harness.ev.build_report

    def with_breach(*a, **kw):
        rep = real(*a, **kw)
        rep["violations"].append({"kind": "pseudo-weight", "t": 3, "fatal": True})
        return rep

    monkeypatch.setattr(harness.ev, "build_report", with_breach)
    out = tmp_path / "r"
    assert main(["run", "--algo", "eflh-basic", "--scenario", str(scen), "--out", str(out)]) == 2
    assert (out / "report.json").exists()


def test_check_coverage(capsys):
    assert main(["check", "coverage", "--schedule", "basic", "--T", "256"]) == 0
    assert main(["check", "coverage", "--schedule", "full", "--T", "512", "--epsilon", "0.3"]) == 0
    assert main(["check", "coverage", "--schedule", "dyadic", "--T", "64"]) == 2
    assert "no witness" in capsys.readouterr().out
    assert main(["check", "coverage", "--schedule", "full", "--T", "64"]) == 1


def test_check_inequalities(capsys):
    assert main(["check", "inequalities"]) == 0
    out = capsys.readouterr().out
    assert "100000 points" in out and "10000 points" in out


def test_compare_single_algo(scen, tmp_path):
    out = tmp_path / "c"
    assert main(["compare", "--algos", "ogd", "--scenario", str(scen), "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "summary.csv").open()))
    assert len(rows) == 1 and rows[0]["algo"] == "ogd"
    cols = list(rows[0])
    assert cols[:3] == ["algo", "max_active_experts", "static_regret"]
    assert cols[-2:] == ["dynamic_regret", "wall_time_ms"]
    assert all(c.startswith("sa_max@") for c in cols[3:-2])


def test_compare_many(scen, tmp_path, monkeypatch):
    monkeypatch.setenv("EFLH_THREADS", "2")
    out = tmp_path / "c"
    algos = "ogd,eflh-basic,eflh-full,eflh-exp,flh-baseline"
    assert main(["compare", "--algos", algos, "--epsilon", "0.3", "--scenario", str(scen), "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "summary.csv").open()))
    assert [r["algo"] for r in rows] == algos.split(",")
    for a in algos.split(","):
        assert (out / a / "report.json").exists()


def test_sweep(scen, tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", "--algos", "eflh-full,ogd", "--epsilons", "0.2,0.4", "--seeds", "1,2",
                 "--scenario", str(scen), "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "summary.csv").open()))
    assert len(rows) == 6
