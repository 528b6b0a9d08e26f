"""Smoothed training-return curves for the three agents on one task.

Trains any missing runs, then writes ``curves_<env>.csv`` with columns
algo,env,seed,frame,return (trailing mean over ``--window`` episodes) and
prints a coarse per-algorithm summary at a few frame marks.
"""

import argparse
import csv
import logging
from collections import defaultdict
from pathlib import Path

import numpy as np

from nrowan.agent import ALGORITHMS
from nrowan.harness import ExperimentConfig, emit_curves, parse_int_list, run_dir, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--env", default="cartpole")
    parser.add_argument("--seeds", default="0-4")
    parser.add_argument("--window", type=int, default=10)
    parser.add_argument("--out", type=Path, default=Path("runs/curves"))
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    dirs = []
    for algo in ALGORITHMS:
        d = run_dir(args.out, algo, args.env)
        if not (d / "aggregate.csv").exists():
            run_experiment(ExperimentConfig(algo, args.env, parse_int_list(args.seeds), d), jobs=args.jobs)
        dirs.append(d)
    path = emit_curves(dirs, args.out / f"curves_{args.env}.csv", args.window)

    series = defaultdict(list)
    with open(path) as fh:
        for row in csv.DictReader(fh):
            series[row["algo"]].append((int(row["frame"]), float(row["return"])))
    marks = (5_000, 10_000, 20_000, 30_000)
    print(f"{'algo':>10}" + "".join(f"{m:>10}" for m in marks))
    for algo, points in series.items():
        frames, values = np.array(points).T
        cols = []
        for m in marks:
            near = values[(frames > m - 2_500) & (frames <= m)]
            cols.append(f"{near.mean():10.1f}" if near.size else f"{'-':>10}")
        print(f"{algo:>10}" + "".join(cols))
    print(path)


if __name__ == "__main__":
    main()
