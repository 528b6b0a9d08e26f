"""Output-layer noise level D over training for NoisyNet-DQN and NROWAN-DQN.

Prints D (mean |sigma| of the output layer) at regular frame marks, averaged
over seeds, together with the k schedule NROWAN followed.
"""

import argparse

import numpy as np

from nrowan.agent import default_config, train
from nrowan.harness import parse_int_list


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--env", default="cartpole")
    parser.add_argument("--seeds", default="0-2")
    parser.add_argument("--frames", type=int, default=30_000)
    parser.add_argument("--every", type=int, default=3_000)
    args = parser.parse_args()

    seeds = parse_int_list(args.seeds)
    logs = {}
    for algo in ("noisynet", "nrowan"):
        runs = [train(args.env, default_config(algo, args.env, frames=args.frames), s).frames for s in seeds]
        logs[algo] = np.array(runs)  # (seeds, frames, [frame, k, D, loss])
    marks = list(range(0, args.frames, args.every)) + [args.frames - 1]
    print(f"{'frame':>8}{'D noisynet':>14}{'D nrowan':>14}{'k nrowan':>10}")
    for i in marks:
        print(f"{i + 1:>8}{logs['noisynet'][:, i, 2].mean():>14.5f}"
              f"{logs['nrowan'][:, i, 2].mean():>14.5f}{logs['nrowan'][:, i, 1].mean():>10.3f}")


if __name__ == "__main__":
    main()
