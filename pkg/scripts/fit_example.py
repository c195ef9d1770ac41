"""Fit all three estimators to one simulated sample and plot the posterior means.

    python scripts/fit_example.py --density f2 --n 400 --out fit.png
"""

import argparse

import numpy as np

from densecraft import DpmmConfig, LindseyConfig, PgmConfig, fit_dpmm, fit_lindsey, fit_pgm
from densecraft.evalbench import get_density, mse
from densecraft.stochastics import RngStream


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--density", default="f3")
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--K", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    truth = get_density(args.density)
    data = truth.sample(args.n, RngStream(args.seed, 1))
    fits = {
        "lindsey": fit_lindsey(data, LindseyConfig(seed=args.seed)),
        f"pgm K={args.K}": fit_pgm(data, PgmConfig(K=args.K, seed=args.seed)),
        "dpmm": fit_dpmm(data, DpmmConfig(seed=args.seed)),
    }
    for name, est in fits.items():
        print(f"{name:10} MSE x1e3 = {1e3 * mse(truth, est, data):.4f}  {est.diagnostics}")

    if args.out:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        xs = np.linspace(*data.interval, 400)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(xs, truth.pdf(xs), "k--", label="truth")
        for name, est in fits.items():
            line, = ax.plot(est.grid, est.mean, label=name)
            ax.fill_between(est.grid, est.lo, est.hi, color=line.get_color(), alpha=0.15)
        ax.set_xlim(*data.interval)
        ax.legend()
        fig.savefig(args.out, dpi=120)
        print(f"saved {args.out}")


if __name__ == "__main__":
    main()
