import json

import numpy as np
import pytest

from rfos import harness as H
from rfos.games import PRESETS, ContractError, MatrixGame


def small(**kw):
    base = dict(h=1, m=2, h_meta=10, meta_steps=400, seeds=(0,))
    base.update(kw)
    return H.RunConfig(**base)


def trivial_game(h_inner=1):
    pay = np.zeros((1, 2, 1, 2))
    pay[0, 0, 0] = [1.0, -1.0]
    pay[0, 1, 0] = [-1.0, 1.0]
    return MatrixGame(pay, h_inner=h_inner, name="trivial")


def test_trivial_game_vi_count(monkeypatch):
    monkeypatch.setitem(PRESETS, "trivial", trivial_game)
    # one window state, two shaper actions: exactly two VI calls at m = 1
    rec = H.run(small(game="trivial", h=0, m=1, meta_steps=50))
    assert rec.summary["vi_count"] == 2
    assert rec.known_frac[-1] == 1.0
    assert rec.reward_norm[-10:].tolist() == [1.0] * 10


def test_run_length_invariant():
    cfg = H.RunConfig(h=1, m=2, h_meta=5, run_multiplier=3)
    meta = cfg.make_meta()
    assert cfg.total_steps() == 3 * 2 * meta.n_steady_states * 5
    rec = H.run(cfg)
    assert len(rec) == cfg.total_steps()
    assert H.RunConfig(h=1, m=2, run_unit="steps", run_multiplier=3).total_steps() == 3 * 2 * 4
    assert H.RunConfig(h=2, m_scaling="state_count", run_unit="steps").effective_m() == 16


def test_rows_ordered_and_episode_means():
    rec = H.run(small(meta_steps=95))
    order = rec.episode * 1000 + rec.step
    assert np.all(np.diff(order) > 0)
    assert rec.step.max() == 9
    means = rec.episode_means()
    assert len(means) == 10
    for e in range(10):
        assert means[e] == pytest.approx(rec.reward_norm[rec.episode == e].mean())


def test_identical_seeds_give_identical_csv(tmp_path):
    H.run(small(), 3, tmp_path / "a.csv")
    H.run(small(), 3, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    H.run(small(), 4, tmp_path / "c.csv")
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "c.csv").read_bytes()


def test_seeds_are_isolated():
    alone = H.run(small(), 1)
    H.run(small(), 0)
    again = H.run(small(), 1)
    assert np.array_equal(alone.reward_norm, again.reward_norm)


def test_csv_round_trip(tmp_path):
    rec = H.run(small(), 0, tmp_path / "r.csv")
    back = H.load_record(tmp_path / "r.csv")
    assert np.array_equal(back.reward_norm, rec.reward_norm)
    assert np.array_equal(back.known_frac, rec.known_frac)
    assert np.array_equal(back.vi, rec.vi)
    assert H.summarize(back, small(), 0) == rec.summary


def test_detect_convergence_constant():
    assert H.detect_convergence(np.ones(1000)) == 0


@pytest.mark.parametrize("edge", [200, 1000, 3000])
def test_detect_convergence_step(edge):
    x = np.zeros(5000)
    x[edge:] = 1.0
    w = H.smoothing_window(len(x))
    found = H.detect_convergence(x)
    assert edge <= found <= edge + w


def test_detect_convergence_ignores_early_luck():
    x = np.zeros(5000)
    x[:50] = 1.0
    x[2000:] = 1.0
    assert H.detect_convergence(x) >= 2000


def test_detect_convergence_never():
    rng = np.random.default_rng(0)
    x = rng.uniform(0.0, 1.0, 2000)
    x[-100:] = 1.0  # plateau far above the noisy bulk, so the low bar fails everywhere before it
    assert H.detect_convergence(x) >= 1900
    with pytest.raises(ContractError):
        H.detect_convergence([])


def test_known_frac_counts_steady_pairs():
    rec = H.run(small(h=1, m=1, meta_steps=2000))
    # the greedy opponent never reaches every window, so some steady pairs stay unknown
    assert 0.0 < rec.known_frac[-1] <= 1.0
    assert np.all(np.diff(rec.known_frac) >= 0)
    assert rec.summary["vi_count"] >= round(rec.known_frac[-1] * 8)


def test_sweep_bookkeeping(tmp_path):
    cfg = small(seeds=(0, 1, 2), meta_steps=300)
    summary = H.sweep(cfg, hs=(1, 2, 3), out=tmp_path, workers=1)
    assert len(list(tmp_path.glob("h*_seed*.csv"))) == 9
    assert [r["h"] for r in summary["rows"]] == [1, 2, 3]
    assert all(r["seeds"] == [0, 1, 2] for r in summary["rows"])
    assert summary["complete"] and not summary["failures"]
    assert [(r["h_from"], r["h_to"]) for r in summary["ratios"]] == [(1, 2), (2, 3)]
    assert summary["ratios"][0]["predicted"] == 16
    for h in (1, 2, 3):
        table = np.loadtxt(tmp_path / f"curve_h{h}.csv", delimiter=",", skiprows=1)
        assert table.shape == (30, 4)
        assert (tmp_path / f"curve_h{h}.dat").exists()
    assert json.loads((tmp_path / "summary.json").read_text()) == summary


def test_recompute_matches_sweep(tmp_path):
    cfg = small(seeds=(0, 1), meta_steps=300)
    summary = H.sweep(cfg, hs=(1, 2), out=tmp_path, workers=1)
    assert H.recompute(tmp_path) == summary


def test_sweep_records_failures(tmp_path, monkeypatch):
    real = H.run

    def flaky(config, seed=0, out_path=None):
        if config.h == 2 and seed == 1:
            raise RuntimeError("boom")
        return real(config, seed, out_path)

    monkeypatch.setattr(H, "run", flaky)
    summary = H.sweep(small(seeds=(0, 1)), hs=(1, 2), out=tmp_path, workers=1)
    assert not summary["complete"]
    assert summary["failures"] == [{"h": 2, "seed": 1, "error": "RuntimeError: boom"}]
    row = summary["rows"][1]
    assert row["seeds"] == [0] and row["missing_seeds"] == [1]


def test_unwritable_output_fails_before_compute(tmp_path, monkeypatch):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    calls = []
    monkeypatch.setattr(H.RunConfig, "make_meta", lambda self: calls.append(1))
    with pytest.raises(ContractError):
        H.run(small(), 0, blocker / "sub" / "r.csv")
    with pytest.raises(ContractError):
        H.sweep(small(), hs=(1,), out=blocker / "sub")
    assert calls == []


def test_output_dir_env_override(monkeypatch, tmp_path):
    cfg = small(out="somewhere")
    assert str(H.output_dir(cfg)) == "somewhere"
    monkeypatch.setenv("RFOS_OUT", str(tmp_path))
    assert H.output_dir(cfg) == tmp_path
    parsed, _ = H.parse_config("[run]\nout = elsewhere\n")
    assert parsed.out == str(tmp_path)


def test_parse_config_sections_and_overrides():
    cfg, extra = H.parse_config("[metagame]\nh = 3\nK = 2\n[rmax]\noptimistic_init = no\n[run]\nseeds = 4, 5\n[sweep]\nhs = 1,2\n", {"gamma": "0.5"})
    assert (cfg.h, cfg.K, cfg.optimistic_init, cfg.seeds, cfg.gamma) == (3, 2, False, (4, 5), 0.5)
    assert extra == {"hs": "1,2"}


@pytest.mark.parametrize(
    "text, overrides",
    [
        ("[nonsense]\nh = 2\n", None),
        ("[run]\nh = 2\n", None),
        ("[metagame]\nh = two\n", None),
        ("[rmax]\noptimistic_init = maybe\n", None),
        ("[rmax]\ngamma = 1.0\n", None),
        ("[run]\nrun_unit = hours\n", None),
        ("", {"nope": "1"}),
    ],
)
def test_parse_config_errors(text, overrides):
    with pytest.raises(ContractError):
        H.parse_config(text, overrides)


def test_default_config_round_trips():
    cfg, extra = H.parse_config(H.default_config_text())
    assert cfg == H.RunConfig()
    assert extra["hs"] == "2,3"
    assert H.config_from_dict(H.config_to_dict(cfg)) == cfg


def test_shipped_configs_parse():
    cfg, extra = H.load_config("configs/scaling.ini")
    assert cfg.m_scaling == "state_count" and cfg.run_unit == "steps"
    assert extra["hs"] == "2,3"
    assert H.load_config("configs/default.ini")[0].h == 2
