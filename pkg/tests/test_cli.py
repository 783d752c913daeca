import json

import numpy as np
import pytest

from tabular_ope.cli import main
from tabular_ope.data import load_dataset
from tabular_ope.mdp import Policy, TabularMDP, load_mdp, random_mdp, save_mdp, save_policy


@pytest.fixture
def sim(tmp_path):
    assert main(["simulate", "--sim-horizon", "3", "--mdp-out", str(tmp_path / "m.json"),
                 "--n", "40", "--seed", "2", "--out", str(tmp_path / "d.jsonl")]) == 0
    return tmp_path


def test_simulate_writes_dataset(sim):
    ds = load_dataset(sim / "d.jsonl")
    assert (ds.n, ds.H, ds.S, ds.A) == (40, 3, 2, 2)
    mdp, meta = load_mdp(sim / "m.json")
    assert meta["family"] == "simulation" and ds.mdp_fingerprint == mdp.fingerprint()


def test_simulate_from_mdp_file(tmp_path, rng):
    save_mdp(random_mdp(3, 2, 4, rng), tmp_path / "m.json")
    save_policy(Policy.uniform(4, 3, 2), tmp_path / "mu.json")
    assert main(["simulate", "--mdp", str(tmp_path / "m.json"), "--mu", str(tmp_path / "mu.json"),
                 "--n", "5", "--out", str(tmp_path / "d.jsonl")]) == 0
    assert load_dataset(tmp_path / "d.jsonl").n == 5


def test_plan_and_ope(sim, capsys):
    assert main(["plan", "--dataset", str(sim / "d.jsonl"), "--eps-opt", "0.1",
                 "--policy-out", str(sim / "pi.json")]) == 0
    plan = json.loads(capsys.readouterr().out)
    assert plan["eps_opt_achieved"] <= 0.1
    assert main(["ope", "--dataset", str(sim / "d.jsonl"), "--mdp", str(sim / "m.json"),
                 "--policy", str(sim / "pi.json"), "--fictitious"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["error"] == pytest.approx(doc["estimate"] - doc["true_value"])
    assert "fictitious_estimate" in doc


def test_sup_with_erm(sim):
    out = sim / "sup.json"
    assert main(["sup", "--mdp", str(sim / "m.json"), "--dataset", str(sim / "d.jsonl"),
                 "--check-erm", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["erm"]["holds"] and doc["class_size"] == 64
    assert doc["sup_value_gap"] <= doc["simulation_lemma_bound"]


def test_hard_round_trip(tmp_path):
    out = tmp_path / "h.json"
    assert main(["hard-gen", "--H-half", "2", "--d-m", "0.01", "--out", str(out)]) == 0
    assert main(["hard-verify", "--mdp", str(out), "--out", str(tmp_path / "rep.json")]) == 0
    assert json.loads((tmp_path / "rep.json").read_text())["ok"]


def test_hard_verify_assertion_exit(tmp_path):
    out = tmp_path / "h.json"
    assert main(["hard-gen", "--H-half", "4", "--d-m", "0.01", "--out", str(out)]) == 0
    assert main(["hard-verify", "--mdp", str(out)]) == 2


def test_hard_gen_validation_exit(tmp_path):
    assert main(["hard-gen", "--tau", "0.9", "--out", str(tmp_path / "h.json")]) == 1


def test_experiment_and_slope(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("kind=fix-ope\nhorizons=4,8,16\nk=3\nn=30\nseed=5\n")
    out = tmp_path / "r.csv"
    assert main(["experiment", "--config", str(cfg), "--n", "40", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("kind,H,n,K,") and len(lines) == 4
    assert lines[1].startswith("fix-ope,4,40,3,")
    assert main(["slope", str(out), "--column", "rmse_fix"]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["points"] == 3
    assert main(["slope", str(out), "--column", "rmse_fix", "--expect", "9", "10"]) == 2


def test_experiment_config_flags_override(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("kind=fix-ope\nhorizons=4,8\nk=2\nn=10\n")
    assert main(["experiment", "--config", str(cfg), "--horizons", "3,5,7", "--out", str(tmp_path / "a.csv")]) == 0
    assert [l.split(",")[1] for l in (tmp_path / "a.csv").read_text().splitlines()[1:]] == ["3", "5", "7"]


@pytest.mark.parametrize(
    "argv",
    [
        ["experiment", "--horizons", "8,4"],
        ["experiment", "--k", "1"],
        ["plan"],
        ["plan", "--bogus"],
        ["ope", "--dataset", "/nonexistent.jsonl"],
        ["sup", "--mdp", "x.json"],
    ],
)
def test_validation_errors_exit_1(argv):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == 1


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("colour=red\n")
    assert main(["experiment", "--config", str(cfg)]) == 1


def test_invalid_mdp_file(tmp_path):
    P = np.full((1, 2, 2, 2), 0.6)
    save_mdp(TabularMDP(P=P, r=np.zeros((2, 2, 2)), d1=[0.5, 0.5]), tmp_path / "m.json")
    assert main(["simulate", "--mdp", str(tmp_path / "m.json"), "--n", "3", "--out", str(tmp_path / "d")]) == 1


def test_erm_violation_exits_2(sim, monkeypatch):
    from tabular_ope import cli
    from tabular_ope.uniform import ErmCheck

    monkeypatch.setattr(cli, "erm_check", lambda truth, model: ErmCheck(1.0, 0.5, False))
    assert main(["sup", "--mdp", str(sim / "m.json"), "--dataset", str(sim / "d.jsonl"), "--check-erm"]) == 2
