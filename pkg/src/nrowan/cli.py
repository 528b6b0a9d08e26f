"""Command line: ``nrowan {run,compare,sweep,curves}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .agent import ALGORITHMS, ConfigError
from .envs import ENVIRONMENTS
from .harness import (
    ExperimentConfig,
    compare,
    default_out_root,
    emit_curves,
    parse_int_list,
    run_dir,
    run_experiment,
    sweep,
)
from .replay import NotReadyError


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _run_overrides(args) -> dict:
    pairs = {"frames": args.frames, "schedule": args.schedule, "k_final": args.k_final, "alpha": args.lr}
    return {key: value for key, value in pairs.items() if value is not None}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nrowan", description="DQN / NoisyNet-DQN / NROWAN-DQN experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, algo=True):
        if algo:
            p.add_argument("--algo", choices=ALGORITHMS, default="nrowan")
        p.add_argument("--env", choices=sorted(ENVIRONMENTS), default="cartpole")
        p.add_argument("--out", type=Path, default=None, help="output root (default $NROWAN_OUT or ./runs)")

    run = sub.add_parser("run", help="train + evaluate one algorithm over several seeds")
    common(run)
    run.add_argument("--seeds", default="0-4")
    run.add_argument("--frames", type=int)
    run.add_argument("--k-final", type=float)
    run.add_argument("--lr", type=float)
    run.add_argument("--schedule", choices=["reward", "frame", "none"])
    run.add_argument("--episodes", type=int, default=64, help="evaluation episodes per seed")
    run.add_argument("--config", type=Path, help="key=value config file; flags override it")
    run.add_argument("--jobs", type=int, default=1)

    cmp_ = sub.add_parser("compare", help="mean±std table across the three algorithms")
    common(cmp_, algo=False)

    sw = sub.add_parser("sweep", help="k_final x learning-rate grid for NROWAN-DQN")
    common(sw, algo=False)
    sw.add_argument("--k-final", default="2,3,4,5,6")
    sw.add_argument("--lr", default="0.0001,0.000075,0.00005,0.000025")
    sw.add_argument("--seeds", default="0-4")
    sw.add_argument("--frames", type=int)
    sw.add_argument("--schedule", choices=["reward", "frame", "none"])
    sw.add_argument("--episodes", type=int, default=64)
    sw.add_argument("--jobs", type=int, default=1)

    cur = sub.add_parser("curves", help="smoothed return-vs-frame series for plotting")
    common(cur, algo=False)
    cur.add_argument("--algo", default=",".join(ALGORITHMS), help="comma-separated algorithms")
    cur.add_argument("--window", type=int, default=10)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    root = args.out if args.out is not None else default_out_root()
    try:
        if args.command == "run":
            if args.config is not None:
                cfg = ExperimentConfig.from_text(args.config.read_text(), root)
                cfg.overrides.update(_run_overrides(args))
            else:
                cfg = ExperimentConfig(args.algo, args.env, [], root, _run_overrides(args))
            if args.config is None or args.seeds != "0-4":
                cfg.seeds = parse_int_list(args.seeds)
            cfg.eval_episodes = args.episodes
            cfg.out_dir = run_dir(root, cfg.algorithm, cfg.environment)
            agg = run_experiment(cfg, jobs=args.jobs)
            print(f"{agg['algo']} {agg['env']}: {agg['mean']:.2f}±{agg['std']:.2f} over seeds {agg['seeds']}")
        elif args.command == "compare":
            print(compare(root, args.env))
        elif args.command == "sweep":
            overrides = {}
            if args.frames is not None:
                overrides["frames"] = args.frames
            if args.schedule is not None:
                overrides["schedule"] = args.schedule
            grid = sweep(
                _floats(args.k_final), _floats(args.lr), args.env, parse_int_list(args.seeds),
                Path(root) / f"sweep_{args.env}", overrides, args.jobs, args.episodes,
            )
            print("k_final,lr,mean,std")
            for row in grid:
                print(",".join(str(v) for v in row))
        elif args.command == "curves":
            algos = [a for a in args.algo.split(",") if a]
            dirs = [run_dir(root, a, args.env) for a in algos]
            path = emit_curves(dirs, Path(root) / f"curves_{args.env}.csv", args.window)
            print(path)
    except (ConfigError, NotReadyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
