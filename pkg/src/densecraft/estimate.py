"""Data containers shared by every estimator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRID_SIZE = 512


@dataclass(frozen=True)
class SampleSet:
    """Univariate sample with its working interval ``[a, b]``."""

    values: np.ndarray
    interval: tuple[float, float]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        a, b = map(float, self.interval)
        if values.size < 2:
            raise ValueError(f"need at least 2 values, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if not a < b:
            raise ValueError(f"interval must satisfy a < b, got [{a}, {b}]")
        if values.min() < a or values.max() > b:
            raise ValueError(f"values fall outside [{a}, {b}]")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "interval", (a, b))

    @classmethod
    def from_values(cls, values, interval=None, pad=0.05):
        """Build a sample, padding the observed range by ``pad`` on each side if no interval is given."""
        values = np.asarray(values, dtype=float).ravel()
        if interval is None:
            lo, hi = values.min(), values.max()
            width = hi - lo
            if width <= 0:
                width = max(abs(lo), 1.0)
            interval = (lo - pad * width, hi + pad * width)
        return cls(values, interval)

    @property
    def n(self) -> int:
        return self.values.size


def trapezoid_mass(grid, density):
    """Trapezoid integral of ``density`` (last axis) over ``grid``."""
    return np.trapezoid(density, grid, axis=-1)


@dataclass
class DensityEstimate:
    """Posterior summary of a density on an evaluation grid.

    ``mean`` is the average of the per-draw densities.  ``lo`` and ``hi`` are
    pointwise 2.5% and 97.5% quantiles.  ``draws`` keeps every ``thin``-th
    retained draw.
    """

    method: str
    grid: np.ndarray
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    draws: np.ndarray
    traces: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __call__(self, x):
        """Linear interpolation of the mean density; zero off the grid."""
        return np.interp(x, self.grid, self.mean, left=0.0, right=0.0)

    def outside(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x < self.grid[0]) | (x > self.grid[-1])


def summarize_draws(method, grid, draws, *, thin=10, traces=None, diagnostics=None):
    """Collapse an (S, G) array of per-draw densities into a :class:`DensityEstimate`."""
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 2 or draws.shape[0] == 0:
        raise ValueError("no usable posterior draws")
    mean = draws.mean(axis=0)
    lo, hi = np.quantile(draws, [0.025, 0.975], axis=0)
    return DensityEstimate(
        method=method,
        grid=np.asarray(grid, dtype=float),
        mean=mean,
        lo=lo,
        hi=hi,
        draws=draws[::max(int(thin), 1)].copy(),
        traces=dict(traces or {}),
        diagnostics=dict(diagnostics or {}),
    )
