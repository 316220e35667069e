import json

from rfos.cli import main
from rfos.harness import RunConfig, parse_config


def test_bounds_json(capsys):
    assert main(["bounds", "--epsilon", "0.5", "--gamma", "0.5", "--lam-sqrt", "2", "--h", "2", "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["sample_complexity_case2"] == 1_179_648
    assert data["label"].startswith("leading-order")


def test_bounds_text(capsys):
    assert main(["bounds", "--format", "text"]) == 0
    assert "leading-order estimate" in capsys.readouterr().out


def test_bounds_rejects_bad_input(capsys):
    assert main(["bounds", "--gamma", "1.0"]) == 2
    assert "error" in capsys.readouterr().err


def test_oracle_best_response(capsys):
    assert main(["oracle", "best-response", "--h", "1", "--horizon", "40"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == 1.0


def test_oracle_simulation(capsys):
    assert main(["oracle", "simulation", "--trials", "50"]) == 0
    assert json.loads(capsys.readouterr().out) == {"trials": 50, "violations": 0}


def test_run_writes_csv(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("RFOS_OUT", str(tmp_path))
    assert main(["run", "--seed", "3", "--set", "h=1", "--set", "meta_steps=200"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["seed"] == 3 and summary["meta_steps"] == 200
    assert (tmp_path / "h1_seed3.csv").exists()


def test_sweep_and_recompute(tmp_path, capsys):
    args = ["sweep", "--hs", "1,2", "--workers", "1", "--out", str(tmp_path), "--set", "meta_steps=200", "--set", "seeds=0,1"]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "h=1" in out and "h 1->2" in out
    before = json.loads((tmp_path / "summary.json").read_text())
    assert main(["sweep", "--recompute", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "summary.json").read_text()) == before


def test_bad_override(capsys):
    assert main(["run", "--set", "nonsense"]) == 2
    assert main(["run", "--set", "bogus=1"]) == 2


def test_config_prints_defaults(capsys):
    assert main(["config"]) == 0
    cfg, _ = parse_config(capsys.readouterr().out)
    assert cfg == RunConfig()
