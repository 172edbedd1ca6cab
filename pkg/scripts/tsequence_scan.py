"""Decay of the one-point gaps t_n for a few alpha values, against the resolvent ceiling."""

import argparse

from dysonlab.analysis import t_sequence
from dysonlab.model import ModelParams


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", type=float, nargs="+", default=[1.6, 1.8, 2.0])
    ap.add_argument("--beta", type=float, default=0.3)
    ap.add_argument("--h", type=float, default=3.0)
    ap.add_argument("--n-max", type=int, default=12)
    ap.add_argument("--width", type=int, default=16, help="L = R")
    args = ap.parse_args()
    for a in args.alphas:
        ts = t_sequence(args.n_max, ModelParams(a, args.beta, args.h), args.width, args.width)
        print(f"alpha = {a}: fitted exponent {ts.fit.exponent:.3f} (target {1 - a:.2f}), "
              f"below ceiling {ts.below_ceiling}")
        ceiling = ts.ceiling if ts.ceiling is not None else [float("nan")] * len(ts.n)
        for n, t, c in zip(ts.n, ts.t, ceiling):
            print(f"  n = {n:3d}  t = {t:.6e}  ceiling = {c:.6e}")


if __name__ == "__main__":
    main()
