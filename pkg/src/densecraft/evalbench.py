"""Reference densities, error metrics and the replicate benchmark harness."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .dpmm import DpmmConfig, fit_dpmm
from .estimate import GRID_SIZE, DensityEstimate, SampleSet
from .lindsey import LindseyConfig, fit_lindsey
from .pgm import HmcConfig, PgmConfig, fit_pgm
from .stochastics import InvalidParameterError, RngStream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReferenceDensity:
    """A test density: a normal mixture, or a gamma when ``gamma_shape`` is set."""

    id: str
    weights: tuple = ()
    means: tuple = ()
    variances: tuple = ()
    gamma_shape: float | None = None
    gamma_scale: float = 1.0

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.gamma_shape is not None:
            return stats.gamma.pdf(x, self.gamma_shape, scale=self.gamma_scale)
        out = np.zeros_like(x)
        for w, m, v in zip(self.weights, self.means, self.variances):
            out = out + w * stats.norm.pdf(x, m, np.sqrt(v))
        return out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.gamma_shape is not None:
            return stats.gamma.cdf(x, self.gamma_shape, scale=self.gamma_scale)
        return sum(w * stats.norm.cdf(x, m, np.sqrt(v))
                   for w, m, v in zip(self.weights, self.means, self.variances))

    def draw(self, n: int, rng: RngStream) -> np.ndarray:
        if self.gamma_shape is not None:
            return rng.gen.standard_gamma(self.gamma_shape, n) * self.gamma_scale
        w = np.asarray(self.weights)
        comp = np.searchsorted(np.cumsum(w), rng.uniform(n) * w.sum(), side="right")
        comp = np.minimum(comp, w.size - 1)
        means = np.asarray(self.means)[comp]
        sds = np.sqrt(np.asarray(self.variances))[comp]
        return means + sds * rng.gen.standard_normal(n)

    def sample(self, n: int, rng: RngStream) -> SampleSet:
        x = self.draw(n, rng)
        if self.gamma_shape is not None:
            hi = x.max()
            return SampleSet(x, (0.0, hi + 0.05 * (hi - x.min())))
        return SampleSet.from_values(x)


REFERENCE_DENSITIES = {
    "f1": ReferenceDensity("f1", (1.0,), (0.0,), (1.0,)),
    "f2": ReferenceDensity("f2", (0.5, 0.5), (-0.5, 0.5), (0.25, 0.25)),
    "f3": ReferenceDensity("f3", (0.5, 0.5), (-1.5, 1.5), (1.0, 1.0)),
    "f4": ReferenceDensity("f4", tuple(np.array([13, 2, 1, 3, 1]) / 20),
                           (-1.0, -0.5, 0.0, 0.5, 1.0), (0.5, 0.5, 1.0, 0.5, 0.5)),
    "f5": ReferenceDensity("f5", gamma_shape=3.0, gamma_scale=1.0),
}

DENSITY_INDEX = {name: i for i, name in enumerate(REFERENCE_DENSITIES, start=1)}


def get_density(id: str) -> ReferenceDensity:
    try:
        return REFERENCE_DENSITIES[id]
    except KeyError:
        raise InvalidParameterError(
            f"unknown density {id!r}; choose from {sorted(REFERENCE_DENSITIES)}") from None


def reference_pdf(id: str, x):
    return get_density(id).pdf(x)


def reference_sample(id: str, n: int, rng: RngStream) -> SampleSet:
    return get_density(id).sample(n, rng)


def mse(truth, estimate: DensityEstimate, points) -> float:
    """Mean squared difference between ``truth`` and the estimate at ``points``.

    ``truth`` is a callable pdf or a :class:`ReferenceDensity`.  The estimate
    is zero off its grid.
    """
    pdf = truth.pdf if isinstance(truth, ReferenceDensity) else truth
    points = np.asarray(points.values if isinstance(points, SampleSet) else points, dtype=float)
    return float(np.mean((pdf(points) - estimate(points)) ** 2))


# --------------------------------------------------------------------------
# methods


@dataclass(frozen=True)
class MethodSpec:
    """A fitter and its settings, e.g. ``MethodSpec("pgm", K=30)``."""

    name: str
    K: int | None = None
    N: int | None = None
    k: int | None = None
    c: float = 100.0
    nu: float = 2.0
    A: float = 10.0
    step_size: float = 0.018
    leapfrog: int = 10
    shape_uses_raw_n: bool = False

    @property
    def label(self) -> str:
        if self.name == "pgm":
            return f"pgm_K{self.K or 30}"
        if self.name == "dpmm" and self.N not in (None, 35):
            return f"dpmm_N{self.N}"
        return self.name


class OracleFitter:
    """Returns the true density on a grid; the zero-error benchmark control."""

    def __init__(self, truth: ReferenceDensity):
        self.truth = truth

    def __call__(self, data: SampleSet) -> DensityEstimate:
        a, b = data.interval
        grid = np.linspace(a, b, GRID_SIZE)
        f = self.truth.pdf(grid)
        return _ExactEstimate("oracle", grid, f, f, f, f[None, :], pdf=self.truth.pdf)


@dataclass
class _ExactEstimate(DensityEstimate):
    """Grid summary that evaluates a known pdf exactly instead of interpolating."""

    pdf: object = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(self.outside(x), 0.0, self.pdf(x))


def fit_method(spec: MethodSpec, data: SampleSet, *, seed: int, iters: int, burnin: int,
               truth: ReferenceDensity | None = None) -> DensityEstimate:
    if spec.name == "lindsey":
        return fit_lindsey(data, LindseyConfig(k=spec.k, iters=iters, burnin=burnin, seed=seed,
                                               shape_uses_raw_n=spec.shape_uses_raw_n))
    if spec.name == "pgm":
        hmc = HmcConfig(spec.step_size, spec.leapfrog)
        return fit_pgm(data, PgmConfig(K=spec.K or 30, c=spec.c, nu=spec.nu, A=spec.A, hmc=hmc,
                                       iters=iters, burnin=burnin, seed=seed))
    if spec.name == "dpmm":
        return fit_dpmm(data, DpmmConfig(N=spec.N or 35, iters=iters, burnin=burnin, seed=seed))
    if spec.name == "oracle":
        if truth is None:
            raise InvalidParameterError("oracle method needs the true density")
        return OracleFitter(truth)(data)
    raise InvalidParameterError(f"unknown method {spec.name!r}")


# --------------------------------------------------------------------------
# benchmark


@dataclass
class BenchmarkSpec:
    methods: list
    densities: list = field(default_factory=lambda: list(REFERENCE_DENSITIES))
    sizes: list = field(default_factory=lambda: [100, 400])
    replicates: int = 100
    seed: int = 0
    iters: int = 5000
    burnin: int = 1000
    mse_grid: bool = False
    jobs: int = 1


@dataclass
class BenchmarkReport:
    method: str
    density: str
    n: int
    replicates: int
    mse: list  # one entry per replicate; None where the fit failed
    errors: list
    wall_clock: list
    outside_points: int = 0

    @property
    def valid_mse(self) -> np.ndarray:
        return np.array([m for m in self.mse if m is not None], dtype=float)

    @property
    def imse(self) -> float:
        v = self.valid_mse
        return float(v.mean()) if v.size else float("nan")

    @property
    def excluded(self) -> int:
        return sum(m is None for m in self.mse)


def replicate_data(density: str, n: int, seed: int, replicate: int) -> SampleSet:
    """Dataset for one replicate; shared by every method for common random numbers."""
    stream = DENSITY_INDEX[density] * 1_000_000 + n
    return reference_sample(density, n, RngStream(seed + replicate, stream))


def _run_replicate(args):
    spec, density, n, seed, r, iters, burnin, mse_grid = args
    truth = get_density(density)
    data = replicate_data(density, n, seed, r)
    t0 = time.perf_counter()
    try:
        est = fit_method(spec, data, seed=seed + r, iters=iters, burnin=burnin, truth=truth)
    except Exception as exc:  # recorded and excluded, never retried
        return None, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0, 0
    elapsed = time.perf_counter() - t0
    if mse_grid:
        points = np.linspace(*data.interval, GRID_SIZE)
    else:
        points = data.values
    return mse(truth, est, points), None, elapsed, int(est.outside(points).sum())


def run_benchmark(spec: BenchmarkSpec) -> list[BenchmarkReport]:
    """Fit every (method, density, n) cell on ``spec.replicates`` simulated datasets."""
    for d in spec.densities:
        get_density(d)
    cells = [(m, d, n) for m in spec.methods for d in spec.densities for n in spec.sizes]
    tasks = [(m, d, n, spec.seed, r, spec.iters, spec.burnin, spec.mse_grid)
             for m, d, n in cells for r in range(spec.replicates)]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_run_replicate, tasks, chunksize=1))
    else:
        results = [_run_replicate(t) for t in tasks]

    reports = []
    s = spec.replicates
    for i, (m, d, n) in enumerate(cells):
        chunk = results[i * s:(i + 1) * s]
        rep = BenchmarkReport(
            method=m.label, density=d, n=n, replicates=s,
            mse=[c[0] for c in chunk], errors=[c[1] for c in chunk],
            wall_clock=[c[2] for c in chunk], outside_points=sum(c[3] for c in chunk))
        if rep.excluded:
            log.warning("%s/%s/n=%d: %d replicate(s) failed", rep.method, d, n, rep.excluded)
        log.info("%s/%s/n=%d IMSE x1e3 = %.4f (%.1fs)", rep.method, d, n, 1e3 * rep.imse,
                 sum(rep.wall_clock))
        reports.append(rep)
    return reports


def imse_table(reports: list[BenchmarkReport]) -> dict:
    """Nested ``{density: {"n=..": {method: IMSE x 1e3}}}``."""
    table: dict = {}
    for r in reports:
        table.setdefault(r.density, {}).setdefault(f"n={r.n}", {})[r.method] = 1e3 * r.imse
    return table


# --------------------------------------------------------------------------
# prior-scale sensitivity


SENSITIVITY_A = (1e-3, 1.0, 10.0, 100.0, 500.0, 1000.0)


def sensitivity_experiment(A_values=SENSITIVITY_A, *, seed=0, n=400, K=20,
                           iters=5000, burnin=1000, density="f3") -> dict:
    """Posterior-mean mixture weights under each Half-t scale ``A`` on one fixed dataset."""
    data = replicate_data(density, n, seed, 0)
    out = {}
    for A in A_values:
        est = fit_pgm(data, PgmConfig(K=K, A=float(A), iters=iters, burnin=burnin, seed=seed))
        out[float(A)] = est.traces["weights"].mean(axis=0)
    return out
