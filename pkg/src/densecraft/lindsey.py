"""Lindsey's method: density estimation as a regression on binned counts.

Counts on ``k`` equal bins are root-transformed so that the responses are
approximately ``sqrt(f(t_j))`` plus homoscedastic noise.  The regression
function is a Bayesian cubic smoothing spline ``b0 + b1*t + Z u`` fitted by
a three-block Gibbs sampler.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .estimate import GRID_SIZE, DensityEstimate, SampleSet, summarize_draws
from .stochastics import (
    InvalidParameterError,
    RngStream,
    draw_mvn,
    draw_truncated_inverse_gamma,
    sym_eigen,
)


@dataclass(frozen=True)
class BinnedData:
    k: int
    n: int
    interval: tuple[float, float]
    centers: np.ndarray
    counts: np.ndarray
    responses: np.ndarray
    sigma0: float


@dataclass(frozen=True)
class SplineDesign:
    """Reduced-rank design for the spline part of the regression.

    ``X`` and ``Z`` are evaluated at the bin centres rescaled to the unit
    interval.  ``omega`` is the full kernel matrix and ``eigenvalues`` its
    spectrum (descending).
    """

    X: np.ndarray
    Z: np.ndarray
    omega: np.ndarray
    eigenvalues: np.ndarray
    m: int
    knots: np.ndarray  # rescaled bin centres
    interval: tuple[float, float]
    _extend: np.ndarray  # maps kernel rows to Z columns

    def rescale(self, t):
        a, b = self.interval
        return (np.asarray(t, dtype=float) - a) / (b - a)

    def basis(self, t):
        """Rows of ``(X | Z)`` at arbitrary abscissae on the original scale."""
        s = self.rescale(t)
        X = np.column_stack([np.ones_like(s), s])
        Z = wahba_kernel(s, self.knots) @ self._extend
        return X, Z


@dataclass
class LindseyHyper:
    sigma_beta2: float = 1e6
    c_tau2: float = 1e5
    c_sigma2: float = 1e3


@dataclass
class LindseyState:
    beta: np.ndarray
    u: np.ndarray
    sigma2: float
    tau2: float


@dataclass
class LindseyConfig:
    k: int | None = None
    m: int | None = None
    iters: int = 5000
    burnin: int = 1000
    hyper: LindseyHyper = field(default_factory=LindseyHyper)
    seed: int = 0
    shape_uses_raw_n: bool = False
    thin: int = 10
    grid_size: int = GRID_SIZE


def default_bins(n: int) -> int:
    return max(10, math.ceil(math.sqrt(n)))


def bin_transform(data: SampleSet, k: int) -> BinnedData:
    """Equal-width binning of ``data`` on its interval and the root transform.

    A value on an interior edge goes to the bin on its left; ``a`` goes to the
    first bin and ``b`` to the last.
    """
    k = int(k)
    if k < 2:
        raise InvalidParameterError(f"need at least 2 bins, got {k}")
    n = data.n
    if n < k:
        warnings.warn(f"fewer observations ({n}) than bins ({k})", stacklevel=2)
    a, b = data.interval
    edges = np.linspace(a, b, k + 1)
    idx = np.searchsorted(edges[1:-1], data.values, side="left")
    counts = np.bincount(idx, minlength=k)
    centers = 0.5 * (edges[:-1] + edges[1:])
    responses = math.sqrt(k / n) * np.sqrt(counts + 0.25)
    return BinnedData(k, n, (a, b), centers, counts, responses, math.sqrt(k / (4 * n)))


def wahba_kernel(s, t):
    """Cubic smoothing-spline kernel ``0.5 * min^2 * (max - min/3)`` on [0, 1]."""
    s = np.asarray(s, dtype=float)[:, None]
    t = np.asarray(t, dtype=float)[None, :]
    lo = np.minimum(s, t)
    hi = np.maximum(s, t)
    return 0.5 * lo**2 * (hi - lo / 3.0)


def build_spline_design(binned: BinnedData, m: int | None = None, mass=0.9999) -> SplineDesign:
    """Assemble the kernel matrix at the bin centres and its top-``m`` factor.

    With ``m=None`` the smallest ``m`` holding ``mass`` of the trace is kept
    (at least 3, so the smoothing-variance update has a positive shape).
    """
    knots = (binned.centers - binned.interval[0]) / (binned.interval[1] - binned.interval[0])
    omega = wahba_kernel(knots, knots)
    vals, vecs = sym_eigen(omega)
    trace = vals.sum()
    if vals[-1] < -1e-10 * trace:
        raise np.linalg.LinAlgError(f"kernel matrix is not PSD (min eigenvalue {vals[-1]:.3g})")
    vals = np.clip(vals, 0.0, None)
    k = binned.k
    if m is None:
        frac = np.cumsum(vals) / trace
        m = int(np.searchsorted(frac, mass) + 1)
        m = min(max(m, 3), k)
    m = int(m)
    if not 0 <= m <= k:
        raise InvalidParameterError(f"m must lie in [0, {k}], got {m}")
    keep = vals[:m]
    if np.any(keep <= 0):
        raise np.linalg.LinAlgError("retained eigenvalues must be positive")
    Z = vecs[:, :m] * np.sqrt(keep)
    X = np.column_stack([np.ones(k), knots])
    extend = vecs[:, :m] / np.sqrt(keep)
    return SplineDesign(X, Z, omega, vals, m, knots, binned.interval, extend)


def _sigma2_shape(binned: BinnedData, raw_n: bool) -> float:
    n = binned.n if raw_n else binned.k
    return n / 2.0 - 1.0


def gibbs_step(state: LindseyState, design: SplineDesign, binned: BinnedData,
               hyper: LindseyHyper, rng: RngStream, shape_uses_raw_n=False) -> LindseyState:
    """One sweep: (beta, u) jointly, then sigma^2, then tau^2."""
    Xs = np.hstack([design.X, design.Z])
    Y = binned.responses
    m = design.m
    prior_prec = np.concatenate([np.full(2, 1.0 / hyper.sigma_beta2), np.full(m, 1.0 / state.tau2)])
    Q = Xs.T @ Xs + state.sigma2 * np.diag(prior_prec)
    cf = cho_factor(Q)
    mean = cho_solve(cf, Xs.T @ Y)
    cov = state.sigma2 * cho_solve(cf, np.eye(Q.shape[0]))
    coef = draw_mvn(rng, mean, 0.5 * (cov + cov.T))
    beta, u = coef[:2], coef[2:]

    resid = Y - Xs @ coef
    sigma2 = draw_truncated_inverse_gamma(
        rng, _sigma2_shape(binned, shape_uses_raw_n), 0.5 * resid @ resid, hyper.c_sigma2)
    tau2 = state.tau2
    if m > 0:
        tau2 = draw_truncated_inverse_gamma(rng, m / 2.0 - 1.0, 0.5 * u @ u, hyper.c_tau2)
    return LindseyState(beta, u, sigma2, tau2)


def _check_config(cfg: LindseyConfig, binned: BinnedData, design: SplineDesign):
    if cfg.iters <= cfg.burnin or cfg.burnin < 0:
        raise InvalidParameterError("need iters > burnin >= 0")
    if _sigma2_shape(binned, cfg.shape_uses_raw_n) <= 0:
        raise InvalidParameterError("noise-variance update has non-positive shape; use more bins")
    if design.m <= 2:
        raise InvalidParameterError("smoothing-variance update needs m >= 3 retained columns")


def initial_state(design: SplineDesign, binned: BinnedData) -> LindseyState:
    beta, *_ = np.linalg.lstsq(design.X, binned.responses, rcond=None)
    return LindseyState(beta, np.zeros(design.m), binned.sigma0**2, 1.0)


def fit_lindsey(data: SampleSet, config: LindseyConfig | None = None) -> DensityEstimate:
    """Run the Gibbs chain and return the posterior-mean density on a grid over ``[a, b]``."""
    cfg = config or LindseyConfig()
    k = cfg.k or default_bins(data.n)
    binned = bin_transform(data, k)
    design = build_spline_design(binned, cfg.m)
    _check_config(cfg, binned, design)
    rng = RngStream(cfg.seed)

    state = initial_state(design, binned)
    keep = cfg.iters - cfg.burnin
    coefs = np.empty((keep, 2 + design.m))
    sigma2 = np.empty(keep)
    tau2 = np.empty(keep)
    for it in range(cfg.iters):
        state = gibbs_step(state, design, binned, cfg.hyper, rng, cfg.shape_uses_raw_n)
        j = it - cfg.burnin
        if j >= 0:
            coefs[j, :2] = state.beta
            coefs[j, 2:] = state.u
            sigma2[j] = state.sigma2
            tau2[j] = state.tau2

    a, b = data.interval
    grid = np.linspace(a, b, cfg.grid_size)
    Xg, Zg = design.basis(grid)
    r = coefs @ np.hstack([Xg, Zg]).T
    dens = np.maximum(r, 0.0) ** 2
    mass = np.trapezoid(dens, grid, axis=1)
    ok = mass >= 1e-12
    dens = dens[ok] / mass[ok, None]
    return summarize_draws(
        "lindsey", grid, dens, thin=cfg.thin,
        traces={"sigma2": sigma2, "tau2": tau2},
        diagnostics={"k": k, "m": design.m, "degenerate_draws": int((~ok).sum()),
                     "retained_draws": int(ok.sum())},
    )
