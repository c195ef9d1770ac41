"""Seeded random primitives and small dense linear algebra shared by the samplers.

Every draw goes through an :class:`RngStream`, a thin wrapper around numpy's
counter-based Philox generator.  A stream is identified by ``(seed, stream)``:
the seed is the Philox key and the stream index occupies the top word of the
counter, so streams sharing a seed never overlap.
"""

from __future__ import annotations

import numpy as np
from scipy import special
from scipy.linalg import lapack


class InvalidParameterError(ValueError):
    """A distribution or routine received parameters outside its domain."""


class DecompositionError(np.linalg.LinAlgError):
    """A matrix factorisation failed (indefinite or asymmetric input)."""


class DegenerateTruncationError(ValueError):
    """A truncated draw was requested on a region of negligible mass."""


class RngStream:
    """Reproducible random stream for one chain or replicate.

    Parameters
    ----------
    seed : int
        64-bit unsigned key.
    stream : int, default 0
        Sub-stream index.  Different indices give disjoint sequences.
    """

    def __init__(self, seed: int, stream: int = 0):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise InvalidParameterError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = seed
        self.stream = int(stream)
        bitgen = np.random.Philox(key=np.array([seed, 0], dtype=np.uint64),
                                  counter=np.array([0, 0, 0, self.stream], dtype=np.uint64))
        self.gen = np.random.Generator(bitgen)

    def spawn(self, stream: int) -> "RngStream":
        return RngStream(self.seed, stream)

    def uniform(self, size=None):
        return self.gen.random(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"


def _positive(name, value):
    if not np.all(np.asarray(value) > 0):
        raise InvalidParameterError(f"{name} must be positive, got {value!r}")


def draw_normal(rng: RngStream, mean=0.0, sd=1.0, size=None):
    _positive("sd", sd)
    return rng.gen.normal(mean, sd, size)


def draw_gamma(rng: RngStream, shape, rate, size=None):
    """Gamma draw with density proportional to ``x**(shape-1) * exp(-rate*x)``."""
    _positive("shape", shape)
    _positive("rate", rate)
    return rng.gen.standard_gamma(shape, size) / rate


def draw_inverse_gamma(rng: RngStream, shape, scale, size=None):
    """Inverse-gamma draw with density proportional to ``x**-(shape+1) * exp(-scale/x)``."""
    _positive("shape", shape)
    _positive("scale", scale)
    return scale / rng.gen.standard_gamma(shape, size)


def draw_truncated_inverse_gamma(rng: RngStream, shape, scale, upper):
    """Inverse-gamma draw restricted to ``(0, upper]``.

    ``X <= upper`` is equivalent to ``1/X >= 1/upper`` where ``1/X`` is
    Gamma(shape, rate=scale), so we invert the upper tail of that gamma.
    Working with the survival function keeps precision when the truncation
    is nearly vacuous.
    """
    _positive("shape", shape)
    _positive("scale", scale)
    _positive("upper", upper)
    tail = special.gammaincc(shape, scale / upper)
    if tail < 1e-12:
        raise DegenerateTruncationError(
            f"IG({shape}, {scale}) has mass {tail:.3g} below {upper}")
    u = tail * (1.0 - rng.uniform())  # in (0, tail]
    y = special.gammainccinv(shape, u) / scale
    x = 1.0 / y
    # inversion round-off can land a hair above the bound
    return min(x, float(upper))


def draw_beta(rng: RngStream, a, b, size=None):
    _positive("a", a)
    _positive("b", b)
    return rng.gen.beta(a, b, size)


def draw_categorical(rng: RngStream, probs) -> int:
    """Draw a 0-based index with probabilities ``probs`` (renormalised)."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InvalidParameterError("probs must be a finite nonnegative vector")
    total = p.sum()
    if total <= 0:
        raise InvalidParameterError("probs are all zero")
    cdf = np.cumsum(p / total)
    idx = int(np.searchsorted(cdf, rng.uniform() * cdf[-1], side="right"))
    return min(idx, p.size - 1)


def draw_categorical_rows(rng: RngStream, log_weights: np.ndarray) -> np.ndarray:
    """One categorical draw per row of an (n, K) array of unnormalised log weights."""
    lw = np.asarray(log_weights, dtype=float)
    n = lw.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    w = np.exp(lw - lw.max(axis=1, keepdims=True))
    cdf = np.cumsum(w, axis=1)
    u = rng.uniform(n) * cdf[:, -1]
    idx = (cdf <= u[:, None]).sum(axis=1)
    return np.minimum(idx, lw.shape[1] - 1)


def _check_symmetric(m: np.ndarray, rtol=1e-12) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidParameterError(f"expected a square matrix, got shape {m.shape}")
    scale = max(np.abs(m).max(), 1.0) if m.size else 1.0
    if np.abs(m - m.T).max(initial=0.0) > rtol * scale:
        raise InvalidParameterError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def sym_eigen(m):
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix."""
    m = _check_symmetric(m, rtol=1e-10)
    vals, vecs = np.linalg.eigh(m)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def draw_mvn(rng: RngStream, mean, cov):
    """Multivariate normal draw.

    Uses a Cholesky factor; positive semi-definite singular covariances fall
    back to an eigendecomposition with negative round-off clipped.
    """
    mean = np.asarray(mean, dtype=float)
    cov = _check_symmetric(cov, rtol=1e-10)
    d = mean.size
    if cov.shape != (d, d):
        raise InvalidParameterError(f"cov shape {cov.shape} does not match mean length {d}")
    z = rng.gen.standard_normal(d)
    if not np.any(cov):
        return mean.copy()
    chol, info = lapack.dpotrf(cov, lower=1, clean=1)
    if info == 0:
        return mean + chol @ z
    vals, vecs = sym_eigen(cov)
    tol = 1e-10 * max(vals[0], 0.0) * d
    if vals[-1] < -tol:
        raise DecompositionError(
            f"covariance is indefinite: leading minor of order {info} is not positive")
    vals = np.where(vals > tol, vals, 0.0)
    root = vecs * np.sqrt(vals)
    return mean + root @ z
