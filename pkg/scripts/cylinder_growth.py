"""Cylinder averages of the half-line density and the closed-form lower bound."""

import argparse

from dysonlab.analysis import cylinder_scan
from dysonlab.model import ModelParams


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=1.6)
    ap.add_argument("--beta", type=float, default=0.4)
    ap.add_argument("--h", type=float, default=2.5)
    ap.add_argument("--n-max", type=int, default=12)
    ap.add_argument("--width", type=int, default=18, help="L = R")
    args = ap.parse_args()
    s = cylinder_scan(args.n_max, args.width - 1, ModelParams(args.alpha, args.beta, args.h),
                      args.width, args.width)
    print(f"C9 = {s.c9:.6f}  R = {s.R}  kappa = {s.kappa:.6f}  exploratory = {s.exploratory}")
    for n, A, lb in zip(s.n, s.average, s.lower_bound):
        print(f"  n = {n:3d}  A_n = {A:.9f}  bound = {lb:.9f}")
    print(f"strictly increasing {s.strictly_increasing}, above bound {s.dominates_bound}, "
          f"stable growth {s.stable_growth} (slopes {s.half_slopes[0]:.3e}, {s.half_slopes[1]:.3e})")


if __name__ == "__main__":
    main()
