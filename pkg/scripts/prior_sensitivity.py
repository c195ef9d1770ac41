"""PGM mixture weights under a range of Half-t scales A, on one two-component dataset.

    python scripts/prior_sensitivity.py --out results/sensitivity.png

Prints the weight table and the largest pairwise gap among A >= 1.  If
matplotlib is installed a bar chart per A is saved as well.
"""

import argparse
import itertools

import numpy as np

from densecraft.evalbench import SENSITIVITY_A, sensitivity_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--A", default=",".join(str(a) for a in SENSITIVITY_A))
    ap.add_argument("--K", type=int, default=20)
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--iters", type=int, default=5000)
    ap.add_argument("--burnin", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="optional path for a bar chart")
    args = ap.parse_args()

    A_values = [float(a) for a in args.A.split(",")]
    weights = sensitivity_experiment(A_values, seed=args.seed, n=args.n, K=args.K,
                                     iters=args.iters, burnin=args.burnin)
    np.set_printoptions(precision=4, suppress=True, linewidth=140)
    for A, w in weights.items():
        print(f"A={A:<8g} max|c-1/K|={np.max(np.abs(w - 1 / args.K)):.4f}  {w}")
    big = [w for A, w in weights.items() if A >= 1]
    if len(big) > 1:
        gap = max(np.max(np.abs(a - b)) for a, b in itertools.combinations(big, 2))
        print(f"largest pairwise gap among A >= 1: {gap:.4f}")

    if args.out:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, axes = plt.subplots(1, len(weights), figsize=(3 * len(weights), 2.6), sharey=True)
        for ax, (A, w) in zip(np.atleast_1d(axes), weights.items()):
            ax.bar(np.arange(1, args.K + 1), w, color="0.4")
            ax.axhline(1 / args.K, color="C3", lw=0.8)
            ax.set_title(f"A = {A:g}")
        fig.tight_layout()
        fig.savefig(args.out, dpi=120)
        print(f"saved {args.out}")


if __name__ == "__main__":
    main()
