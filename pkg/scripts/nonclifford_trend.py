#!/usr/bin/env python3
"""First-passage time of the even-step magnetization below 1/2 for the
disordered non-Clifford model, compared across lattice sizes."""

import argparse
import time

import numpy as np

from toomdtc.dense import NonCliffordModel, NonCliffordParams
from toomdtc.lattice import build_lattice
from toomdtc.seeding import spawn_rng


def first_passage(rows, cols, n_traj, steps, seed):
    lat = build_lattice("square_periodic", (rows, cols))
    times = np.empty(n_traj)
    for k in range(n_traj):
        rng = spawn_rng(seed, rows * 100 + cols, k)
        params = NonCliffordParams(lattice=lat, h=0.9 * np.pi / 2, p_nec=0.9,
                                   steps=steps)
        series = NonCliffordModel(params, rng).run(rng)
        even = series[::2]
        below = np.nonzero(even < 0.5)[0]
        times[k] = 2 * below[0] if below.size else 2 * (even.size - 1)
    return times


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trajectories", type=int, default=200)
    ap.add_argument("--steps", type=int, default=120)
    ap.add_argument("--seed", type=int, default=90210)
    args = ap.parse_args()

    for rows, cols in [(2, 3), (3, 4)]:
        t0 = time.time()
        fp = first_passage(rows, cols, args.trajectories, args.steps, args.seed)
        print(f"{rows}x{cols}: median first-passage {np.median(fp):.0f} periods "
              f"(mean {fp.mean():.1f})  ({time.time() - t0:.0f}s)")


if __name__ == "__main__":
    main()
