"""IMSE (x1e3) for every method, reference density and sample size.

    python scripts/imse_benchmark.py --replicates 100 --jobs 8 --out results/table

Writes ``<out>.csv`` (one row per replicate) and ``<out>.json`` (the IMSE
grid), then prints the grid.  With the defaults this is a long run; use
``--replicates 5 --iters 1500 --burnin 500`` for a quick look.
"""

import argparse
import json
import logging
from pathlib import Path

from densecraft import cli
from densecraft.evalbench import BenchmarkSpec, MethodSpec, imse_table, run_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replicates", type=int, default=100)
    ap.add_argument("--sizes", default="100,400")
    ap.add_argument("--densities", default="f1,f2,f3,f4,f5")
    ap.add_argument("--K", default="20,30,50")
    ap.add_argument("--iters", type=int, default=5000)
    ap.add_argument("--burnin", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--mse-grid", action="store_true")
    ap.add_argument("--out", default="results/table")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    methods = [MethodSpec("pgm", K=int(k)) for k in args.K.split(",")]
    methods += [MethodSpec("lindsey"), MethodSpec("dpmm")]
    spec = BenchmarkSpec(methods=methods, densities=args.densities.split(","),
                         sizes=[int(s) for s in args.sizes.split(",")],
                         replicates=args.replicates, seed=args.seed, iters=args.iters,
                         burnin=args.burnin, mse_grid=args.mse_grid, jobs=args.jobs)
    reports = run_benchmark(spec)

    out = Path(args.out)
    cfg = dict(cli.DEFAULTS, methods="pgm,lindsey,dpmm", densities=args.densities,
               sizes=args.sizes, replicates=args.replicates, seed=args.seed, iters=args.iters,
               burnin=args.burnin, mse_grid=args.mse_grid, K=args.K)
    cli.write_benchmark(reports, cfg, out.parent, out.name)

    labels = [m.label for m in methods]
    table = imse_table(reports)
    print(f"{'density':8} {'n':>5} " + " ".join(f"{lab:>9}" for lab in labels))
    for d, by_n in table.items():
        for n, row in by_n.items():
            print(f"{d:8} {n[2:]:>5} " + " ".join(f"{row[lab]:9.3f}" for lab in labels))
    print(json.dumps({"excluded": sum(r.excluded for r in reports)}))


if __name__ == "__main__":
    main()
