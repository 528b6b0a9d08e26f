"""NROWAN-DQN k_final x learning-rate sweep on CartPole.

The full grid is nine k_final values by four learning rates; the defaults
here are a reduced grid that fits in well under an hour per seed.
"""

import argparse
import logging
from pathlib import Path

from nrowan.harness import parse_int_list, sweep


def floats(text):
    return [float(v) for v in text.split(",") if v]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--env", default="cartpole")
    parser.add_argument("--k-final", default="2.0,4.0,6.0")
    parser.add_argument("--lr", default="0.0001,0.00005,0.000025")
    parser.add_argument("--seeds", default="0-2")
    parser.add_argument("--frames", type=int, default=None)
    parser.add_argument("--out", type=Path, default=Path("runs/sweep"))
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    overrides = {} if args.frames is None else {"frames": args.frames}
    ks, lrs = floats(args.k_final), floats(args.lr)
    grid = sweep(ks, lrs, args.env, parse_int_list(args.seeds), args.out, overrides, args.jobs)
    cells = {(k, lr): f"{m:7.2f}±{s:5.2f}" for k, lr, m, s in grid}
    print("k_final \\ lr " + "".join(f"{lr:>16g}" for lr in lrs))
    for k in ks:
        print(f"{k:>12g} " + "".join(f"{cells[k, lr]:>16}" for lr in lrs))


if __name__ == "__main__":
    main()
