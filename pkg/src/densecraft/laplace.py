"""Normal approximation to the posterior of the mixture log-weights.

For multinomial counts ``n_1..n_K`` with weights ``softmax(0, beta)`` and a
Gaussian prior ``N(beta0, A0)``, the posterior is approximately normal with
precision ``J_n = J(beta_hat) + A0^{-1}`` and mean
``m_n = J_n^{-1} (A0^{-1} beta0 + J(beta_hat) beta_hat)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .pgm import PenaltyMatrix, weights_from_beta


@dataclass(frozen=True)
class LaplaceApprox:
    beta_hat: np.ndarray
    J_hat: np.ndarray
    A0inv: np.ndarray
    beta0: np.ndarray
    J_n: np.ndarray
    m_n: np.ndarray

    @property
    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.J_n)

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))


def multinomial_mle(counts) -> np.ndarray:
    """Log-odds of each count against the first: ``log n_j - log n_1``.

    Empty cells make the maximum lie at infinity; every count is then bumped
    by one half before taking logs.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 1 or counts.size < 2:
        raise ValueError("need a vector of at least two counts")
    if np.any(counts < 0) or counts.sum() <= 0:
        raise ValueError("counts must be nonnegative with a positive total")
    if np.any(counts == 0):
        warnings.warn("zero counts present; adding 1/2 to every cell", stacklevel=2)
        counts = counts + 0.5
    logs = np.log(counts)
    return logs[1:] - logs[0]


def observed_information(beta_hat, n) -> np.ndarray:
    """Negative Hessian of ``sum n_j log c_j`` at ``beta_hat``: ``n (diag(c) - c c')`` over components 2..K."""
    c = weights_from_beta(beta_hat)[1:]
    return float(n) * (np.diag(c) - np.outer(c, c))


def laplace_posterior(counts, beta0, A0inv) -> LaplaceApprox:
    counts = np.asarray(counts, dtype=float)
    beta_hat = multinomial_mle(counts)
    J_hat = observed_information(beta_hat, counts.sum())
    A0inv = np.asarray(A0inv, dtype=float)
    beta0 = np.asarray(beta0, dtype=float)
    J_n = J_hat + A0inv
    J_n = 0.5 * (J_n + J_n.T)
    cf = cho_factor(J_n)
    m_n = cho_solve(cf, A0inv @ beta0 + J_hat @ beta_hat)
    return LaplaceApprox(beta_hat, J_hat, A0inv, beta0, J_n, m_n)


def penalty_laplace(counts, penalty: PenaltyMatrix, tau2: float) -> LaplaceApprox:
    """Approximation under the smoothness prior: zero mean, precision ``P*/tau^2``."""
    k1 = penalty.Pstar.shape[0]
    return laplace_posterior(counts, np.zeros(k1), penalty.Pstar / tau2)
