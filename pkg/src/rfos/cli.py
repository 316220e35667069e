"""Command line entry point: ``rfos run|sweep|bounds|oracle|config``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds, oracle
from .games import ContractError, make_game
from .harness import cell_name, default_config_text, load_config, output_dir, recompute, run, sweep


def _overrides(pairs: list[str]) -> dict[str, str]:
    out = {}
    for item in pairs or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ContractError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = val
    return out


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def cmd_run(args) -> int:
    config, _ = load_config(args.config, _overrides(args.set))
    seed = config.seeds[0] if args.seed is None else args.seed
    path = output_dir(config) / f"{cell_name(config.h, seed)}.csv"
    rec = run(config, seed, path if config.write_csv else None)
    print(json.dumps(rec.summary, indent=2))
    return 0


def cmd_sweep(args) -> int:
    if args.recompute:
        summary = recompute(args.recompute)
    else:
        config, extra = load_config(args.config, _overrides(args.set))
        hs = _ints(args.hs or extra.get("hs", "2,3"))
        if args.with_h4 and 4 not in hs:
            hs = hs + (4,)
        workers = args.workers if args.workers is not None else int(extra.get("workers", 0) or 0)
        summary = sweep(config, hs, out=args.out, workers=workers or None)
    for row in summary["rows"]:
        print(
            f"h={row['h']}  conv_step={row['convergence_step_mean']}  "
            f"(+/- {row['convergence_step_sem']})  log16={row['log16_convergence_step']}"
        )
    for r in summary["ratios"]:
        print(f"h {r['h_from']}->{r['h_to']}: observed x{r['observed']} predicted x{r['predicted']}")
    for f in summary["failures"]:
        print(f"FAILED h={f['h']} seed={f['seed']}: {f['error']}", file=sys.stderr)
    return 0 if summary["complete"] else 1


def cmd_bounds(args) -> int:
    lam = math.sqrt(args.lam_sqrt) if args.lam_sqrt is not None else args.lam
    inputs = bounds.BoundInputs(
        epsilon=args.epsilon,
        delta=args.delta,
        gamma=args.gamma,
        lam=lam,
        n=args.n,
        card_s=args.card_s,
        card_a=args.card_a,
        h=args.h,
        lipschitz_r=args.lipschitz_r,
        lipschitz_t=args.lipschitz_t,
        lipschitz=args.lipschitz,
        k_disc=args.k_disc,
        k_p=args.k_p,
    )
    report = bounds.total_bound(inputs)
    if args.format in ("text", "both"):
        print(report.to_text())
    if args.format in ("json", "both"):
        print(report.to_json())
    return 0


def cmd_oracle(args) -> int:
    if args.what == "best-response":
        game = make_game(args.game)
        res = oracle.best_response_search(
            game,
            h=args.h,
            horizon=args.horizon,
            opponent_lr=args.opponent_lr,
            opponent_init=args.opponent_init,
            episode_length=args.episode_length,
        )
        print(json.dumps({"value": res.value, "nodes": res.nodes, "policy": {str(k): v for k, v in res.policy.items()}}, indent=2))
    elif args.what == "vi":
        rng = np.random.default_rng(args.seed)
        mdp = oracle.random_explicit_mdp(rng, args.states, args.actions, args.gamma)
        V, pi = oracle.exact_vi(mdp)
        print(json.dumps({"V": V.tolist(), "policy": pi.tolist()}, indent=2))
    elif args.what == "simulation":
        rng = np.random.default_rng(args.seed)
        bad = 0
        for _ in range(args.trials):
            M = oracle.random_explicit_mdp(rng, int(rng.integers(1, 9)), int(rng.integers(1, 4)), args.gamma)
            M_hat = oracle.perturb(M, rng, float(rng.uniform(0, 0.5)))
            pi = rng.integers(0, M.n_actions, size=M.n_states)
            bad += not oracle.check_simulation_lemma(M, M_hat, pi).holds
        print(json.dumps({"trials": args.trials, "violations": bad}))
    elif args.what == "discretise":
        mdp = oracle.SyntheticContinuousMdp.random(np.random.default_rng(args.seed), gamma=args.gamma)
        ref, _ = oracle.exact_vi(oracle.discretise_explicit(mdp, 1 / 256))
        rows = []
        for k in (2, 3, 4, 5):
            V, _ = oracle.exact_vi(oracle.discretise_explicit(mdp, 2.0**-k))
            gap = oracle.transition_gap(mdp, 2.0**-k)
            rows.append({"lam": 2.0**-k, "value_gap": float(np.abs(V - ref[:: 2 ** (8 - k)]).max()), "k_p": gap.k_p})
        print(json.dumps(rows, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rfos", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="one R-FOS run")
    r.add_argument("--config", type=Path)
    r.add_argument("--seed", type=int)
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep the window length h over seeds")
    s.add_argument("--config", type=Path)
    s.add_argument("--hs", help="comma-separated window lengths (default from [sweep] or 2,3)")
    s.add_argument("--with-h4", action="store_true", help="add the slow h=4 cell")
    s.add_argument("--workers", type=int)
    s.add_argument("--out", type=Path)
    s.add_argument("--recompute", type=Path, metavar="DIR", help="rebuild summary.json from stored CSVs")
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bounds", help="evaluate the leading-order bounds")
    b.add_argument("--epsilon", type=float, default=0.1)
    b.add_argument("--delta", type=float, default=0.1)
    b.add_argument("--gamma", type=float, default=0.8)
    b.add_argument("--lam", type=float, default=0.5)
    b.add_argument("--lam-sqrt", type=float, help="give lambda as sqrt(x), e.g. 2 for sqrt(2)")
    b.add_argument("--n", type=int, default=2)
    b.add_argument("--card-s", type=int, default=1)
    b.add_argument("--card-a", type=int, default=2)
    b.add_argument("--h", type=int, default=2)
    for name in ("lipschitz-r", "lipschitz-t", "lipschitz", "k-disc", "k-p"):
        b.add_argument(f"--{name}", type=float, default=1.0)
    b.add_argument("--format", choices=("text", "json", "both"), default="both")
    b.set_defaults(func=cmd_bounds)

    o = sub.add_parser("oracle", help="brute-force reference computations")
    o.add_argument("what", choices=("best-response", "vi", "simulation", "discretise"))
    o.add_argument("--game", default="matching_pennies")
    o.add_argument("--h", type=int, default=2)
    o.add_argument("--horizon", type=int, default=1000)
    o.add_argument("--episode-length", type=int)
    o.add_argument("--opponent-lr", type=float, default=0.1)
    o.add_argument("--opponent-init", type=float, default=0.5)
    o.add_argument("--states", type=int, default=4)
    o.add_argument("--actions", type=int, default=2)
    o.add_argument("--gamma", type=float, default=0.8)
    o.add_argument("--trials", type=int, default=1000)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("config", help="print every config key with its default")
    c.set_defaults(func=lambda _args: print(default_config_text()) or 0)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
