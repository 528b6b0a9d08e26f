"""Train DQN, NoisyNet-DQN and NROWAN-DQN on the three control tasks and print
the mean±std comparison table (64 evaluation episodes per seed).

    python scripts/compare_agents.py --seeds 0-4 --out runs/compare
"""

import argparse
import logging
from pathlib import Path

from nrowan.agent import ALGORITHMS
from nrowan.harness import ExperimentConfig, compare, parse_int_list, run_dir, run_experiment

ENVS = ("cartpole", "mountaincar", "acrobot")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", default="0-4")
    parser.add_argument("--envs", default=",".join(ENVS))
    parser.add_argument("--frames", type=int, default=None, help="override the 30K frame budget")
    parser.add_argument("--out", type=Path, default=Path("runs/compare"))
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    overrides = {} if args.frames is None else {"frames": args.frames}
    envs = [e for e in args.envs.split(",") if e]
    for env in envs:
        for algo in ALGORITHMS:
            cfg = ExperimentConfig(algo, env, parse_int_list(args.seeds), run_dir(args.out, algo, env), dict(overrides))
            run_experiment(cfg, jobs=args.jobs)
    for i, env in enumerate(envs):
        table = compare(args.out, env).splitlines()
        print("\n".join(table if i == 0 else table[2:]))


if __name__ == "__main__":
    main()
