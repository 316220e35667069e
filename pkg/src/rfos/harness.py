"""Experiment driver: single runs, convergence detection, and h-sweeps."""

from __future__ import annotations

import configparser
import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .games import ContractError, make_game
from .learners import ActionRule
from .metagame import MetaGame
from .rmax import RmaxModel

CSV_COLUMNS = ["episode", "step", "reward_raw", "reward_norm", "known_frac", "vi"]


@dataclass
class RunConfig:
    game: str = "matching_pennies"
    h_inner: int = 1
    case: str = "simplified_II"
    window: str = "joint"
    h: int = 2
    lam: float = 0.5
    K: int = 1
    m: int = 10
    m_scaling: str = "fixed"  # "fixed" uses m; "state_count" uses ceil(m_scale * |S_d|)
    m_scale: float = 1.0
    gamma: float = 0.8
    epsilon: float = 0.1
    delta: float = 0.1
    optimistic_init: bool = True
    h_meta: int = 100
    meta_steps: int = 0  # explicit length; 0 means run_multiplier * m * |S_d| in run_unit
    run_multiplier: int = 10
    run_unit: str = "episodes"  # "episodes" (times h_meta steps) or "steps"
    meta_rule: str = "boltzmann"
    temperature: float = 0.1
    inner_rule: str = "greedy"
    opponent_lr: float = 0.1
    opponent_init: float = 0.5
    opponent_rule: str = "greedy"
    opponent_reset: bool = True
    seeds: tuple[int, ...] = (0, 1, 2)
    out: str = "runs"
    conv_high: float = 0.95
    conv_low: float = 0.90
    write_csv: bool = True

    def validate(self) -> "RunConfig":
        if not 0.0 <= self.gamma < 1.0:
            raise ContractError("gamma must lie in [0, 1)")
        if not 0.0 < self.epsilon < 1.0 / (1.0 - self.gamma):
            raise ContractError("epsilon must lie in (0, 1/(1-gamma))")
        if not 0.0 < self.delta < 1.0:
            raise ContractError("delta must lie in (0, 1)")
        for name in ("h_inner", "K", "m", "h_meta", "run_multiplier"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive")
        if self.h < 0 or self.meta_steps < 0:
            raise ContractError("h and meta_steps must be non-negative")
        if not self.lam > 0:
            raise ContractError("lambda must be positive")
        if not 0 < self.conv_low <= self.conv_high:
            raise ContractError("need 0 < conv_low <= conv_high")
        if self.m_scaling not in ("fixed", "state_count"):
            raise ContractError("m_scaling must be 'fixed' or 'state_count'")
        if self.run_unit not in ("episodes", "steps"):
            raise ContractError("run_unit must be 'episodes' or 'steps'")
        if not self.m_scale > 0:
            raise ContractError("m_scale must be positive")
        if not self.seeds:
            raise ContractError("at least one seed is required")
        return self

    def make_meta(self) -> MetaGame:
        return MetaGame(
            make_game(self.game, self.h_inner),
            case=self.case,
            h=self.h,
            K=self.K,
            lam=self.lam,
            window=self.window,
            opponent_lr=self.opponent_lr,
            opponent_init=self.opponent_init,
            opponent_rule=ActionRule.parse(self.opponent_rule),
            inner_rule=ActionRule.parse(self.inner_rule),
        )

    def effective_m(self, meta: MetaGame | None = None) -> int:
        if self.m_scaling == "fixed":
            return self.m
        meta = meta or self.make_meta()
        return max(1, math.ceil(self.m_scale * meta.n_steady_states - 1e-9))

    def total_steps(self, meta: MetaGame | None = None) -> int:
        if self.meta_steps:
            return self.meta_steps
        meta = meta or self.make_meta()
        n = self.run_multiplier * self.effective_m(meta) * meta.n_steady_states
        return n * self.h_meta if self.run_unit == "episodes" else n


@dataclass
class RunRecord:
    episode: np.ndarray
    step: np.ndarray
    reward_raw: np.ndarray
    reward_norm: np.ndarray
    known_frac: np.ndarray
    vi: np.ndarray
    summary: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.step)

    def episode_means(self) -> np.ndarray:
        counts = np.bincount(self.episode)
        return np.bincount(self.episode, weights=self.reward_norm) / np.maximum(counts, 1)


def run(config: RunConfig, seed: int = 0, out_path: str | Path | None = None) -> RunRecord:
    """Run R-FOS for ``config.total_steps()`` meta-steps."""
    config.validate()
    if out_path is not None:
        out_path = Path(out_path)
        _ensure_writable(out_path.parent)
    meta = config.make_meta()
    model = RmaxModel(meta.n_actions, config.effective_m(meta), config.gamma, config.epsilon, config.optimistic_init)
    rule = ActionRule.parse(config.meta_rule, config.temperature)
    rng = np.random.default_rng(seed)
    total = config.total_steps(meta)
    steady_pairs = meta.n_steady_states * meta.n_actions
    known_steady = 0

    ep = np.empty(total, dtype=np.int64)
    st = np.empty(total, dtype=np.int64)
    raw = np.empty(total)
    norm = np.empty(total)
    kf = np.empty(total)
    vi = np.zeros(total, dtype=bool)

    fh = writer = None
    if out_path is not None and config.write_csv:
        fh = open(out_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
    try:
        t = 0
        episode = 0
        while t < total:
            meta.reset(reset_opponents=config.opponent_reset or episode == 0)
            s = meta.state_code
            for k in range(config.h_meta):
                if t >= total:
                    break
                a = model.choose_action(s, rule, rng)
                res = meta.step(a, rng)
                s_next = meta.state_code
                fired = model.record(s, a, res.reward, s_next)
                if fired and meta.is_steady(s):
                    known_steady += 1
                ep[t], st[t], raw[t], norm[t] = episode, k, res.reward_raw, res.reward
                kf[t] = known_steady / steady_pairs
                vi[t] = fired
                if writer is not None:
                    writer.writerow([episode, k, repr(float(res.reward_raw)), repr(float(res.reward)), repr(float(kf[t])), int(fired)])
                s = s_next
                t += 1
            episode += 1
    finally:
        if fh is not None:
            fh.close()

    rec = RunRecord(ep, st, raw, norm, kf, vi)
    rec.summary = summarize(rec, config, seed)
    return rec


def trailing_mean(x: np.ndarray, window: int) -> np.ndarray:
    """Mean of the last ``window`` values (fewer at the start)."""
    x = np.asarray(x, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, len(x) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def smoothing_window(n: int) -> int:
    return max(100, int(math.ceil(0.01 * n)))


def detect_convergence(series, high: float = 0.95, low: float = 0.90, window: int | None = None) -> int:
    """First index where the smoothed series reaches ``high`` x plateau and
    never falls below ``low`` x plateau afterwards; ``len(series)`` if never.

    The smoothing is a trailing mean (over fewer points during the first
    window) and the plateau is the mean of the final 5%. A lucky early start is
    not counted because the smoothed curve must stay above the low bar for good.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n == 0:
        raise ContractError("series must be non-empty")
    w = smoothing_window(n) if window is None else window
    sm = trailing_mean(x, w)
    tail = max(1, int(math.ceil(0.05 * n)))
    plateau = float(x[-tail:].mean())
    # suffix minimum tells whether the curve ever drops below the low bar later
    suffix_min = np.minimum.accumulate(sm[::-1])[::-1]
    ok = (sm >= high * plateau) & (suffix_min >= low * plateau)
    hits = np.flatnonzero(ok)
    return int(hits[0]) if len(hits) else n


def summarize(rec: RunRecord, config: RunConfig, seed: int) -> dict:
    n = len(rec)
    tail = max(1, n // 10)
    conv_step = detect_convergence(rec.reward_norm, config.conv_high, config.conv_low)
    ep_means = rec.episode_means()
    conv_ep = detect_convergence(ep_means, config.conv_high, config.conv_low) if len(ep_means) else 0
    full = np.flatnonzero(rec.known_frac >= 1.0)
    return {
        "seed": seed,
        "h": config.h,
        "meta_steps": n,
        "episodes": int(rec.episode[-1]) + 1 if n else 0,
        "convergence_step": conv_step,
        "convergence_episode": conv_ep,
        "final_mean_reward": float(rec.reward_norm[-tail:].mean()),
        "mean_reward": float(rec.reward_norm.mean()),
        "known_frac": float(rec.known_frac[-1]) if n else 0.0,
        "all_known_step": int(full[0]) if len(full) else None,
        "vi_count": int(rec.vi.sum()),
    }


# sweeps ----------------------------------------------------------------------


def _ensure_writable(directory: Path) -> None:
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ContractError(f"cannot create output directory {directory}: {exc}") from None
    if not os.access(directory, os.W_OK):
        raise ContractError(f"output directory {directory} is not writable")


def output_dir(config: RunConfig) -> Path:
    """``RFOS_OUT`` wins over the configured directory."""
    return Path(os.environ.get("RFOS_OUT") or config.out)


def cell_name(h: int, seed: int) -> str:
    return f"h{h}_seed{seed}"


def _run_cell(config: RunConfig, h: int, seed: int, out_dir: str) -> dict:
    cfg = replace(config, h=h)
    path = Path(out_dir) / f"{cell_name(h, seed)}.csv"
    try:
        rec = run(cfg, seed, path if cfg.write_csv else None)
    except Exception as exc:  # recorded per cell, the sweep goes on
        return {"h": h, "seed": seed, "error": f"{type(exc).__name__}: {exc}"}
    return {"h": h, "seed": seed, "summary": rec.summary, "episode_means": rec.episode_means().tolist()}


def sweep(
    config: RunConfig,
    hs: Iterable[int] = (2, 3),
    out: str | Path | None = None,
    workers: int | None = None,
) -> dict:
    """Run every (h, seed) cell and write ``summary.json`` plus per-curve files."""
    config.validate()
    hs = tuple(int(h) for h in hs)
    out_dir = Path(out) if out is not None else output_dir(config)
    _ensure_writable(out_dir)
    (out_dir / "config.json").write_text(json.dumps(config_to_dict(config) | {"hs": list(hs)}, indent=2))

    jobs = [(h, seed) for h in hs for seed in config.seeds]
    workers = workers or min(len(jobs), os.cpu_count() or 1)
    if workers <= 1:
        cells = [_run_cell(config, h, seed, str(out_dir)) for h, seed in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, config, h, seed, str(out_dir)) for h, seed in jobs]
            cells = [f.result() for f in futures]
    return write_summary(aggregate(cells, config, hs), cells, out_dir)


def _mean_sem(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    sem = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return float(arr.mean()), sem


def _log16(x: float | None) -> float | None:
    return math.log(x, 16) if x and x > 0 else None


def predicted_ratio(config: RunConfig) -> float:
    """Growth of the Case II sample-complexity term per extra window step."""
    from .bounds import BoundInputs, sample_complexity_case2_value

    game = make_game(config.game, config.h_inner)
    base = BoundInputs(
        epsilon=config.epsilon,
        delta=config.delta,
        gamma=config.gamma,
        lam=config.lam,
        n=game.n_players,
        card_s=game.n_states,
        card_a=max(game.actions_per_player),
        h=1,
    )
    ratio = sample_complexity_case2_value(replace(base, h=2)) / sample_complexity_case2_value(base)
    return int(ratio) if ratio.denominator == 1 else float(ratio)


def aggregate(cells: list[dict], config: RunConfig, hs: Iterable[int]) -> dict:
    rows = []
    for h in hs:
        done = [c for c in cells if c["h"] == h and "summary" in c]
        failed = [c for c in cells if c["h"] == h and "error" in c]
        steps = [c["summary"]["convergence_step"] for c in done]
        eps = [c["summary"]["convergence_episode"] for c in done]
        mean_s, sem_s = _mean_sem(steps)
        mean_e, sem_e = _mean_sem(eps)
        rows.append(
            {
                "h": h,
                "seeds": [c["seed"] for c in done],
                "missing_seeds": [c["seed"] for c in failed],
                "convergence_steps": steps,
                "convergence_step_mean": mean_s,
                "convergence_step_sem": sem_s,
                "log16_convergence_step": _log16(mean_s),
                "convergence_episodes": eps,
                "convergence_episode_mean": mean_e,
                "convergence_episode_sem": sem_e,
                "log16_convergence_episode": _log16(mean_e),
                "final_mean_reward": _mean_sem([c["summary"]["final_mean_reward"] for c in done])[0],
                "known_frac": _mean_sem([c["summary"]["known_frac"] for c in done])[0],
            }
        )
    pred = predicted_ratio(config)
    ratios = []
    for lo, hi in zip(rows, rows[1:]):
        obs = None
        if lo["convergence_step_mean"] and hi["convergence_step_mean"] is not None:
            obs = hi["convergence_step_mean"] / lo["convergence_step_mean"]
        ratios.append(
            {
                "h_from": lo["h"],
                "h_to": hi["h"],
                "predicted": pred,
                "observed": obs,
                "log16_observed": _log16(obs),
                "observed_over_predicted": obs / pred if obs is not None else None,
            }
        )
    return {
        "unit": "meta-steps (episode counts reported alongside)",
        "conv_high": config.conv_high,
        "conv_low": config.conv_low,
        "rows": rows,
        "ratios": ratios,
        "failures": [c for c in cells if "error" in c],
        "complete": all("summary" in c for c in cells),
    }


def write_summary(summary: dict, cells: list[dict], out_dir: Path) -> dict:
    out_dir = Path(out_dir)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    for h in sorted({c["h"] for c in cells}):
        curves = [c["episode_means"] for c in cells if c["h"] == h and "episode_means" in c]
        if not curves:
            continue
        n = min(len(c) for c in curves)
        arr = np.array([c[:n] for c in curves])
        mean = arr.mean(axis=0)
        sem = arr.std(axis=0, ddof=1) / math.sqrt(len(arr)) if len(arr) > 1 else np.zeros(n)
        episodes = np.arange(1, n + 1)
        table = np.column_stack([episodes, np.log(episodes) / math.log(16), mean, sem])
        header = "episode,log16_episode,mean_reward,sem_reward"
        np.savetxt(out_dir / f"curve_h{h}.csv", table, delimiter=",", header=header, comments="", fmt="%.10g")
        np.savetxt(out_dir / f"curve_h{h}.dat", table, header=header.replace(",", " "), fmt="%.10g")
    return summary


def load_record(path: str | Path) -> RunRecord:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(CSV_COLUMNS):
        raise ContractError(f"{path}: expected columns {CSV_COLUMNS}")
    return RunRecord(
        episode=data[:, 0].astype(np.int64),
        step=data[:, 1].astype(np.int64),
        reward_raw=data[:, 2],
        reward_norm=data[:, 3],
        known_frac=data[:, 4],
        vi=data[:, 5].astype(bool),
    )


def recompute(out_dir: str | Path) -> dict:
    """Rebuild ``summary.json`` from the stored per-cell CSVs and config alone."""
    out_dir = Path(out_dir)
    raw = json.loads((out_dir / "config.json").read_text())
    hs = raw.pop("hs")
    config = config_from_dict(raw)
    cells = []
    for h in hs:
        cfg = replace(config, h=h)
        for seed in config.seeds:
            path = out_dir / f"{cell_name(h, seed)}.csv"
            if not path.exists():
                cells.append({"h": h, "seed": seed, "error": f"missing {path.name}"})
                continue
            rec = load_record(path)
            cells.append({"h": h, "seed": seed, "summary": summarize(rec, cfg, seed), "episode_means": rec.episode_means().tolist()})
    return write_summary(aggregate(cells, config, hs), cells, out_dir)


# config files ----------------------------------------------------------------

SECTIONS = {
    "game": ("game", "h_inner"),
    "metagame": ("case", "window", "h", "lam", "K"),
    "rmax": ("m", "m_scaling", "m_scale", "gamma", "epsilon", "delta", "optimistic_init"),
    "policy": ("meta_rule", "temperature", "inner_rule"),
    "opponent": ("opponent_lr", "opponent_init", "opponent_rule", "opponent_reset"),
    "run": ("h_meta", "meta_steps", "run_multiplier", "run_unit", "seeds", "out", "write_csv"),
    "convergence": ("conv_high", "conv_low"),
}


def _coerce(name: str, text: str):
    default = getattr(RunConfig, name)
    text = text.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low not in configparser.ConfigParser.BOOLEAN_STATES:
            raise ContractError(f"{name}: not a boolean: {text!r}")
        return configparser.ConfigParser.BOOLEAN_STATES[low]
    if isinstance(default, tuple):
        return tuple(int(x) for x in text.replace(" ", "").split(",") if x)
    try:
        return type(default)(text)
    except ValueError:
        raise ContractError(f"{name}: cannot parse {text!r} as {type(default).__name__}") from None


def config_to_dict(config: RunConfig) -> dict:
    d = asdict(config)
    d["seeds"] = list(config.seeds)
    return d


def config_from_dict(d: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(d) - known
    if unknown:
        raise ContractError(f"unknown config keys: {sorted(unknown)}")
    d = dict(d)
    if "seeds" in d:
        d["seeds"] = tuple(d["seeds"])
    return RunConfig(**d).validate()


def parse_config(text: str, overrides: dict[str, str] | None = None) -> tuple[RunConfig, dict]:
    """Parse INI text into a RunConfig; a ``[sweep]`` section is returned separately."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep "K" upper-case
    parser.read_string(text)
    values: dict = {}
    extra: dict = {}
    for section in parser.sections():
        if section == "sweep":
            extra.update(parser[section])
            continue
        if section not in SECTIONS:
            raise ContractError(f"unknown config section [{section}]")
        for key, val in parser[section].items():
            if key not in SECTIONS[section]:
                raise ContractError(f"key {key!r} does not belong in [{section}]")
            values[key] = _coerce(key, val)
    for key, val in (overrides or {}).items():
        if key not in {f.name for f in fields(RunConfig)}:
            raise ContractError(f"unknown config key {key!r}")
        values[key] = _coerce(key, val)
    if os.environ.get("RFOS_OUT"):
        values["out"] = os.environ["RFOS_OUT"]
    return RunConfig(**values).validate(), extra


def load_config(path: str | Path | None, overrides: dict[str, str] | None = None) -> tuple[RunConfig, dict]:
    text = Path(path).read_text() if path else ""
    return parse_config(text, overrides)


def default_config_text() -> str:
    """Every key with its default, in the layout ``parse_config`` reads."""
    base = config_to_dict(RunConfig())
    lines = []
    for section, keys in SECTIONS.items():
        lines.append(f"[{section}]")
        for k in keys:
            v = base[k]
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = str(v).lower()
            lines.append(f"{k} = {v}")
        lines.append("")
    lines += ["[sweep]", "hs = 2,3", "workers = 0", ""]
    return "\n".join(lines)
