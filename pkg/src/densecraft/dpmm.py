"""Truncated Dirichlet process mixture of Gaussians, blocked Gibbs sampler.

Weights come from a stick-breaking construction truncated at ``N`` sticks
(the last stick takes the remainder).  Component means share a normal prior
centred at ``theta``; variances are inverse-gamma; the concentration
``alpha`` is gamma.  Every update is conjugate.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .estimate import GRID_SIZE, DensityEstimate, SampleSet, summarize_draws
from .stochastics import (
    InvalidParameterError,
    RngStream,
    draw_beta,
    draw_categorical_rows,
    draw_gamma,
    draw_inverse_gamma,
    draw_normal,
)

_V_MAX = 1.0 - 1e-12


@dataclass(frozen=True)
class DpmmHyper:
    sigma_mu2: float
    nu1: float
    nu2: float
    eta1: float
    eta2: float
    A: float

    def __post_init__(self):
        for name in ("sigma_mu2", "nu1", "nu2", "eta1", "eta2", "A"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")

    @classmethod
    def for_interval(cls, interval, **overrides):
        """Weakly informative defaults scaled to the working interval."""
        width = interval[1] - interval[0]
        base = dict(sigma_mu2=width**2, nu1=2.0, nu2=(0.1 * width) ** 2,
                    eta1=1.0, eta2=1.0, A=width**2)
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)


@dataclass
class DpmmState:
    v: np.ndarray
    pi: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    z: np.ndarray
    theta: float
    alpha: float
    clamped: int = 0  # sticks pinned below 1 so far

    @property
    def N(self) -> int:
        return self.v.size


@dataclass
class DpmmConfig:
    N: int = 35
    hyper: DpmmHyper | None = None
    iters: int = 5000
    burnin: int = 1000
    seed: int = 0
    thin: int = 10
    grid_size: int = GRID_SIZE


def stick_break(v) -> np.ndarray:
    """``pi_k = v_k * prod_{l<k} (1 - v_l)``."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or np.any(v > 1) or not np.all(np.isfinite(v)):
        raise InvalidParameterError("stick fractions must lie in [0, 1]")
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - v[:-1])])
    return v * remaining


def normal_logpdf(x, mu, sigma2):
    x = np.asarray(x, dtype=float)
    return -0.5 * (np.log(2.0 * np.pi * sigma2) + (x[:, None] - mu) ** 2 / sigma2)


def indicator_log_probs(x, pi, mu, sigma2) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(pi) + normal_logpdf(x, mu, sigma2)


def mixture_density(x, pi, mu, sigma2):
    x = np.asarray(x, dtype=float)
    return np.exp(normal_logpdf(x.ravel(), mu, sigma2)) @ pi


def gibbs_sweep(state: DpmmState, x, hyper: DpmmHyper, rng: RngStream) -> DpmmState:
    """One blocked-Gibbs sweep: z, v, mu, sigma2, theta, alpha (in that order)."""
    x = np.asarray(x, dtype=float)
    N = state.N
    if x.size:
        z = draw_categorical_rows(rng, indicator_log_probs(x, state.pi, state.mu, state.sigma2))
    else:
        z = np.zeros(0, dtype=np.intp)
    m = np.bincount(z, minlength=N).astype(float)
    sums = np.bincount(z, weights=x, minlength=N)

    tail = np.cumsum(m[::-1])[::-1] - m  # points in later components
    v = np.ones(N)
    v[:-1] = draw_beta(rng, 1.0 + m[:-1], state.alpha + tail[:-1])
    over = v[:-1] > _V_MAX
    v[:-1][over] = _V_MAX
    pi = stick_break(v)

    prec = m / state.sigma2 + 1.0 / hyper.sigma_mu2
    mean = (sums / state.sigma2 + state.theta / hyper.sigma_mu2) / prec
    mu = mean + draw_normal(rng, 0.0, 1.0, N) / np.sqrt(prec)

    ss = np.bincount(z, weights=(x - mu[z]) ** 2, minlength=N) if x.size else np.zeros(N)
    sigma2 = draw_inverse_gamma(rng, hyper.nu1 + 0.5 * m, hyper.nu2 + 0.5 * ss)

    t_prec = 1.0 / hyper.A + N / hyper.sigma_mu2
    theta = float(mu.sum() / hyper.sigma_mu2 / t_prec + draw_normal(rng) / np.sqrt(t_prec))

    alpha = float(draw_gamma(rng, hyper.eta1 + N - 1, hyper.eta2 - np.log1p(-v[:-1]).sum()))
    return DpmmState(v, pi, mu, sigma2, z, theta, alpha, state.clamped + int(over.sum()))


def initial_state(x, N: int, hyper: DpmmHyper, interval) -> DpmmState:
    """Means at evenly spaced sample quantiles (interval points if no data), equal weights."""
    x = np.asarray(x, dtype=float)
    probs = (np.arange(N) + 0.5) / N
    if x.size:
        mu = np.quantile(x, probs)
    else:
        mu = interval[0] + probs * (interval[1] - interval[0])
    v = 1.0 / (N - np.arange(N))  # equal weights, v_N = 1
    sigma2 = np.full(N, hyper.nu2 / max(hyper.nu1 - 1.0, 1.0))
    z = np.zeros(x.size, dtype=np.intp)
    return DpmmState(v, stick_break(v), mu, sigma2, z, float(np.mean(mu)), 1.0)


def output_grid(interval, size=GRID_SIZE) -> np.ndarray:
    a, b = interval
    pad = 0.1 * (b - a)
    return np.linspace(a - pad, b + pad, size)


def fit_dpmm(data: SampleSet, config: DpmmConfig | None = None) -> DensityEstimate:
    """Run the blocked Gibbs chain; each retained draw is renormalised on the output grid."""
    cfg = config or DpmmConfig()
    if cfg.iters <= cfg.burnin or cfg.burnin < 0:
        raise InvalidParameterError("need iters > burnin >= 0")
    if cfg.N < 2:
        raise InvalidParameterError(f"truncation level must be >= 2, got {cfg.N}")
    hyper = cfg.hyper or DpmmHyper.for_interval(data.interval)
    rng = RngStream(cfg.seed)
    x = data.values
    state = initial_state(x, cfg.N, hyper, data.interval)

    xs = output_grid(data.interval, cfg.grid_size)
    keep = cfg.iters - cfg.burnin
    dens = np.empty((keep, xs.size))
    alpha = np.empty(keep)
    occupied = np.empty(keep, dtype=int)
    pis, mus, sig2s = [], [], []
    for it in range(cfg.iters):
        state = gibbs_sweep(state, x, hyper, rng)
        j = it - cfg.burnin
        if j >= 0:
            dens[j] = mixture_density(xs, state.pi, state.mu, state.sigma2)
            alpha[j] = state.alpha
            occupied[j] = np.unique(state.z).size
            if j % cfg.thin == 0:
                pis.append(state.pi)
                mus.append(state.mu)
                sig2s.append(state.sigma2)

    mass = np.trapezoid(dens, xs, axis=1)
    dens /= mass[:, None]
    return summarize_draws(
        "dpmm", xs, dens, thin=cfg.thin,
        traces={"alpha": alpha, "occupied": occupied,
                "pi": np.array(pis), "mu": np.array(mus), "sigma2": np.array(sig2s)},
        diagnostics={"N": cfg.N, "clamped_sticks": state.clamped,
                     "min_grid_mass": float(mass.min()), "mean_grid_mass": float(mass.mean())},
    )


def relabel(state: DpmmState, perm) -> DpmmState:
    """Permute component labels (weights, parameters and indicators together)."""
    perm = np.asarray(perm)
    inv = np.argsort(perm)
    return replace(state, pi=state.pi[perm], mu=state.mu[perm], sigma2=state.sigma2[perm],
                   v=state.v[perm], z=inv[state.z])
