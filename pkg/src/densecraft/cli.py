"""Command-line front end.

Subcommands::

    densecraft fit            --method lindsey|pgm|dpmm --input data.csv --output out/
    densecraft simulate       --method pgm --density f3 --n 400 --replicates 100
    densecraft compare        --methods lindsey,pgm,dpmm --K 20,30,50
    densecraft sensitivity    --A 0.001,1,10,100,500,1000
    densecraft laplace-check  [--input counts.csv] --tau2 1

Every flag may also come from a JSON file given with ``--config``; flags on
the command line win.  Exit status: 0 success, 2 bad configuration or input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .estimate import DensityEstimate, SampleSet
from .evalbench import (
    BenchmarkSpec,
    MethodSpec,
    fit_method,
    imse_table,
    run_benchmark,
    sensitivity_experiment,
)
from .laplace import penalty_laplace
from .pgm import HmcConfig, build_penalty, sample_beta_chain
from .stochastics import DecompositionError, DegenerateTruncationError, RngStream

log = logging.getLogger("densecraft")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

DEFAULTS = {
    "method": "pgm",
    "input": None,
    "output": "densecraft-out",
    "k": None,
    "K": None,
    "N": None,
    "iters": 5000,
    "burnin": 1000,
    "seed": None,
    "jobs": 1,
    "format": "csv",
    "mse_grid": False,
    "A": None,
    "c": 100.0,
    "nu": 2.0,
    "step_size": 0.018,
    "leapfrog": 10,
    "shape_uses_raw_n": False,
    "thin": 10,
    # benchmark / experiment options
    "methods": "lindsey,pgm,dpmm",
    "densities": "f1,f2,f3,f4,f5",
    "sizes": "100,400",
    "replicates": 100,
    "density": "f1",
    "n": None,
    "tau2": 1.0,
}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# I/O


def load_csv(path) -> SampleSet:
    """Read one numeric column (an optional header line is skipped)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"input file not found: {path}")
    values = []
    with path.open(newline="") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row if c.strip()]
            if not cells:
                continue
            if len(cells) != 1:
                raise ConfigError(f"{path}: row {row_no} has {len(cells)} columns, expected 1")
            try:
                values.append(float(cells[0]))
            except ValueError:
                if row_no == 1:
                    continue  # header
                raise ConfigError(f"{path}: row {row_no}: non-numeric value {cells[0]!r}") from None
    if not values:
        raise ConfigError(f"{path}: no data rows")
    x = np.asarray(values)
    finite = np.isfinite(x)
    if not finite.any():
        raise ConfigError(f"{path}: every value is NaN or infinite")
    if not finite.all():
        warnings.warn(f"{path}: dropping {int((~finite).sum())} non-finite value(s)", stacklevel=2)
        x = x[finite]
    if x.size < 2:
        raise ConfigError(f"{path}: need at least 2 values, got {x.size}")
    return SampleSet.from_values(x)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_density_csv(est: DensityEstimate, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["grid", "mean", "lo", "hi"])
        for row in zip(est.grid, est.mean, est.lo, est.hi):
            w.writerow([_fmt(v) for v in row])


def read_density_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    cols = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return {c: data[:, i] for i, c in enumerate(cols)}


def write_trace_csv(est: DensityEstimate, path):
    scalar = {k: np.asarray(v) for k, v in est.traces.items() if np.ndim(v) == 1}
    names = sorted(scalar)
    length = max((v.size for v in scalar.values()), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", *names])
        for i in range(length):
            w.writerow([i, *(_fmt(scalar[k][i]) for k in names)])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------------
# configuration


def _csv_list(text, cast=str):
    if text is None:
        return []
    if isinstance(text, (list, tuple)):
        return [cast(t) for t in text]
    return [cast(t) for t in str(text).split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", help="JSON file with default flag values")
    common.add_argument("--method", choices=["lindsey", "pgm", "dpmm"], default=S)
    common.add_argument("--input", default=S)
    common.add_argument("--output", default=S)
    common.add_argument("--k", type=int, default=S, help="Lindsey bin count")
    common.add_argument("--K", default=S, help="PGM component count (comma list for compare)")
    common.add_argument("--N", type=int, default=S, help="DPMM truncation level")
    common.add_argument("--iters", type=int, default=S)
    common.add_argument("--burnin", type=int, default=S)
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--jobs", type=int, default=S)
    common.add_argument("--format", choices=["csv", "json"], default=S)
    common.add_argument("--mse-grid", dest="mse_grid", action="store_true", default=S)
    common.add_argument("--A", default=S, help="Half-t scale (comma list for sensitivity)")
    common.add_argument("--c", type=float, default=S)
    common.add_argument("--nu", type=float, default=S)
    common.add_argument("--step-size", dest="step_size", type=float, default=S)
    common.add_argument("--leapfrog", type=int, default=S)
    common.add_argument("--shape-uses-raw-n", dest="shape_uses_raw_n", action="store_true", default=S)
    common.add_argument("--thin", type=int, default=S)
    common.add_argument("--methods", default=S)
    common.add_argument("--densities", default=S)
    common.add_argument("--sizes", default=S)
    common.add_argument("--replicates", type=int, default=S)
    common.add_argument("--density", default=S)
    common.add_argument("--n", type=int, default=S)
    common.add_argument("--tau2", type=float, default=S)
    common.add_argument("-v", "--verbose", action="store_true", default=False)

    parser = argparse.ArgumentParser(prog="densecraft", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("fit", "fit one method to a CSV sample"),
                        ("simulate", "replicate simulation for one method and density"),
                        ("compare", "IMSE table over methods x densities x sizes"),
                        ("sensitivity", "mixture weights under several Half-t scales"),
                        ("laplace-check", "normal approximation vs HMC chain moments")]:
        sub.add_parser(name, parents=[common], help=help_)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    cfg.update({k: v for k, v in vars(args).items() if k in DEFAULTS})
    if cfg["seed"] is None:
        cfg["seed"] = int(os.environ.get("DENSECRAFT_SEED", 0))
    if not cfg["iters"] > cfg["burnin"] >= 0:
        raise ConfigError(f"need iters > burnin >= 0, got iters={cfg['iters']} burnin={cfg['burnin']}")
    if cfg["jobs"] < 1:
        raise ConfigError("--jobs must be >= 1")
    return cfg


def method_specs(cfg, names=None) -> list[MethodSpec]:
    names = names or [cfg["method"]]
    Ks = _csv_list(cfg["K"], int) or [30]
    A = _csv_list(cfg["A"], float) or [10.0]
    specs = []
    for name in names:
        common = dict(c=cfg["c"], nu=cfg["nu"], A=A[0], step_size=cfg["step_size"],
                      leapfrog=cfg["leapfrog"], shape_uses_raw_n=cfg["shape_uses_raw_n"],
                      k=cfg["k"], N=cfg["N"])
        if name == "pgm":
            specs.extend(MethodSpec("pgm", K=K, **common) for K in Ks)
        elif name in ("lindsey", "dpmm", "oracle"):
            specs.append(MethodSpec(name, **common))
        else:
            raise ConfigError(f"unknown method {name!r}")
    return specs


# --------------------------------------------------------------------------
# commands


def cmd_fit(cfg) -> int:
    if not cfg["input"]:
        raise ConfigError("fit needs --input")
    data = load_csv(cfg["input"])
    spec = method_specs(cfg)[0]
    est = fit_method(spec, data, seed=cfg["seed"], iters=cfg["iters"], burnin=cfg["burnin"])
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    if cfg["format"] == "csv":
        write_density_csv(est, out / "density.csv")
        write_trace_csv(est, out / "trace.csv")
    else:
        write_json({"grid": est.grid, "mean": est.mean, "lo": est.lo, "hi": est.hi,
                    "traces": {k: v for k, v in est.traces.items() if np.ndim(v) == 1}},
                   out / "density.json")
    write_json({"method": spec.label, "n": data.n, "interval": data.interval,
                "diagnostics": est.diagnostics, "config": cfg,
                "integral": float(np.trapezoid(est.mean, est.grid))},
               out / "summary.json")
    return EXIT_OK


def write_benchmark(reports, cfg, out: Path, stem: str):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{stem}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "density", "n", "replicate", "mse", "error"])
        for r in reports:
            for i, (m, e) in enumerate(zip(r.mse, r.errors)):
                w.writerow([r.method, r.density, r.n, i, "" if m is None else _fmt(m), e or ""])
    cells = [{"method": r.method, "density": r.density, "n": r.n, "replicates": r.replicates,
              "imse_x1e3": 1e3 * r.imse, "excluded": r.excluded,
              "outside_points": r.outside_points} for r in reports]
    config = {k: cfg[k] for k in ("methods", "densities", "sizes", "replicates", "seed",
                                  "iters", "burnin", "mse_grid", "K", "method", "density", "n")}
    write_json({"table_imse_x1e3": imse_table(reports), "cells": cells, "config": config},
               out / f"{stem}.json")


def cmd_simulate(cfg) -> int:
    sizes = [cfg["n"]] if cfg["n"] else _csv_list(cfg["sizes"], int)
    spec = BenchmarkSpec(methods=method_specs(cfg), densities=[cfg["density"]], sizes=sizes,
                         replicates=cfg["replicates"], seed=cfg["seed"], iters=cfg["iters"],
                         burnin=cfg["burnin"], mse_grid=cfg["mse_grid"], jobs=cfg["jobs"])
    write_benchmark(run_benchmark(spec), cfg, Path(cfg["output"]), "simulate")
    return EXIT_OK


def cmd_compare(cfg) -> int:
    spec = BenchmarkSpec(methods=method_specs(cfg, _csv_list(cfg["methods"])),
                         densities=_csv_list(cfg["densities"]),
                         sizes=_csv_list(cfg["sizes"], int),
                         replicates=cfg["replicates"], seed=cfg["seed"], iters=cfg["iters"],
                         burnin=cfg["burnin"], mse_grid=cfg["mse_grid"], jobs=cfg["jobs"])
    write_benchmark(run_benchmark(spec), cfg, Path(cfg["output"]), "compare")
    return EXIT_OK


def cmd_sensitivity(cfg) -> int:
    A_values = _csv_list(cfg["A"], float) or [1e-3, 1.0, 10.0, 100.0, 500.0, 1000.0]
    K = (_csv_list(cfg["K"], int) or [20])[0]
    weights = sensitivity_experiment(A_values, seed=cfg["seed"], n=cfg["n"] or 400, K=K,
                                     iters=cfg["iters"], burnin=cfg["burnin"])
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sensitivity.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["A", "component", "weight"])
        for A, c in weights.items():
            for j, v in enumerate(c, start=1):
                w.writerow([_fmt(A), j, _fmt(v)])
    write_json({"K": K, "weights": {repr(A): c for A, c in weights.items()}},
               out / "sensitivity.json")
    return EXIT_OK


def _read_counts(path) -> np.ndarray:
    counts = []
    with open(path, newline="") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            try:
                counts.append(float(row[0]))
            except ValueError:
                if row_no == 1:
                    continue
                raise ConfigError(f"{path}: row {row_no}: non-numeric count {row[0]!r}") from None
    counts = np.asarray(counts)
    if counts.size < 4 or np.any(counts < 0) or np.any(counts != np.round(counts)):
        raise ConfigError(f"{path}: need at least 4 nonnegative integer counts")
    return counts


def laplace_check(counts, tau2, *, c=100.0, hmc=None, iters=5000, burnin=1000, seed=0) -> dict:
    """Compare the normal approximation with an HMC chain at fixed counts and ``tau^2``."""
    counts = np.asarray(counts, dtype=float)
    penalty = build_penalty(counts.size, c)
    approx = penalty_laplace(counts, penalty, tau2)
    draws, acc = sample_beta_chain(counts, tau2, penalty, hmc or HmcConfig(), RngStream(seed),
                                   iters=iters, burnin=burnin)
    mean = draws.mean(axis=0)
    sd = draws.std(axis=0, ddof=1)
    z = (approx.m_n - mean) / sd
    return {
        "counts": counts, "tau2": tau2, "acceptance_rate": acc,
        "beta_hat": approx.beta_hat, "m_n": approx.m_n, "laplace_sd": approx.sd,
        "chain_mean": mean, "chain_sd": sd, "z": z, "max_abs_z": float(np.max(np.abs(z))),
        "cov_max_abs_diff": float(np.max(np.abs(approx.covariance - np.cov(draws.T)))),
    }


def cmd_laplace_check(cfg) -> int:
    if cfg["input"]:
        counts = _read_counts(cfg["input"])
    else:
        K = (_csv_list(cfg["K"], int) or [5])[0]
        p = np.arange(1, K + 1, dtype=float)
        counts = RngStream(cfg["seed"], 1).gen.multinomial(cfg["n"] or 1000, p / p.sum())
    hmc = HmcConfig(cfg["step_size"], cfg["leapfrog"])
    report = laplace_check(counts, cfg["tau2"], c=cfg["c"], hmc=hmc, iters=cfg["iters"],
                           burnin=cfg["burnin"], seed=cfg["seed"])
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    write_json(report, out / "laplace_check.json")
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "sensitivity": cmd_sensitivity,
    "laplace-check": cmd_laplace_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (np.linalg.LinAlgError, DecompositionError, DegenerateTruncationError,
            FloatingPointError) as exc:
        print(f"densecraft: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, OSError) as exc:
        print(f"densecraft: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
