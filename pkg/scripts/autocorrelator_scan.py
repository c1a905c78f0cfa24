#!/usr/bin/env python3
"""Steady-state two-point correlator at half-system separation.

Compares the ordered regime against the high-entangling-noise regime
where the correlator should vanish.
"""

import argparse
import time

from toomdtc.analysis import autocorrelator
from toomdtc.lattice import build_lattice
from toomdtc.protocol import ProtocolParams


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=20)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=31337)
    args = ap.parse_args()

    L = args.size
    lat = build_lattice("square_periodic", (L, L))
    j = lat.site(L // 2, 0)
    jp = lat.site(L // 2, L // 2)
    for p_unit, label in [(0.02, "ordered"), (0.1, "paramagnetic")]:
        params = ProtocolParams(lattice=lat, p_flip=0.95, p_nec=0.8,
                                p_unit=p_unit, p_reset=0.02, p_me=0.01)
        for t in (10, 11):
            t0 = time.time()
            c, se = autocorrelator(params, j, jp, t, args.reps, args.seed)
            print(f"{label:13s} t={t:2d}  C = {c:+.4f} +- {se:.4f}  "
                  f"({time.time() - t0:.0f}s)")


if __name__ == "__main__":
    main()
