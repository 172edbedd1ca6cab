"""Partial Hellinger sums for Bernoulli products across alpha, showing the 3/2 dichotomy."""

import argparse

import numpy as np

from dysonlab.analysis import kakutani_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", type=float, nargs="+", default=list(np.round(np.arange(1.3, 2.05, 0.1), 2)))
    ap.add_argument("--beta", type=float, default=0.5)
    ap.add_argument("--n-max", type=int, default=10 ** 6)
    args = ap.parse_args()
    for a in args.alphas:
        r = kakutani_experiment(args.n_max, a, args.beta)
        print(f"alpha = {a:.2f}  sum = {r.partial_sums[-1]:.6e}  last-decade increment "
              f"{r.last_decade_increment:.3e}  {r.verdict}")


if __name__ == "__main__":
    main()
