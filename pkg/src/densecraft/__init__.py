"""Bayesian nonparametric density estimation."""

from .dpmm import DpmmConfig, DpmmHyper, fit_dpmm
from .estimate import DensityEstimate, SampleSet
from .lindsey import LindseyConfig, LindseyHyper, fit_lindsey
from .pgm import HmcConfig, PgmConfig, fit_pgm

__all__ = [
    "DensityEstimate",
    "DpmmConfig",
    "DpmmHyper",
    "HmcConfig",
    "LindseyConfig",
    "LindseyHyper",
    "PgmConfig",
    "SampleSet",
    "fit_dpmm",
    "fit_lindsey",
    "fit_pgm",
]
