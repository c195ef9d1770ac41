import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from densecraft.laplace import (
    laplace_posterior,
    multinomial_mle,
    observed_information,
    penalty_laplace,
)
from densecraft.pgm import HmcConfig, build_penalty, sample_beta_chain, weights_from_beta
from densecraft.stochastics import RngStream


def test_mle_cases():
    np.testing.assert_allclose(multinomial_mle([10, 10, 10]), [0.0, 0.0])
    b = multinomial_mle([10, 20, 30])
    np.testing.assert_allclose(b, np.log([2.0, 3.0]))
    np.testing.assert_allclose(weights_from_beta(b), [1 / 6, 2 / 6, 3 / 6])


def test_mle_zero_counts_smoothed():
    with pytest.warns(UserWarning):
        b = multinomial_mle([0, 4, 10])
    np.testing.assert_allclose(weights_from_beta(b), np.array([0.5, 4.5, 10.5]) / 15.5)
    with pytest.raises(ValueError):
        multinomial_mle([0, 0, 0])


@given(st.lists(st.integers(1, 1000), min_size=2, max_size=30))
def test_mle_reproduces_frequencies(counts):
    counts = np.array(counts, dtype=float)
    np.testing.assert_allclose(weights_from_beta(multinomial_mle(counts)), counts / counts.sum(),
                               rtol=1e-10)


def _loglik(beta, counts):
    return counts @ np.log(weights_from_beta(beta))


def test_information_matches_fd_hessian():
    g = np.random.default_rng(0)
    for _ in range(20):
        K = int(g.integers(2, 9))
        counts = g.integers(1, 100, size=K).astype(float)
        beta = g.normal(size=K - 1)
        h = 1e-4
        H = np.empty((K - 1, K - 1))
        for i in range(K - 1):
            for j in range(K - 1):
                ei, ej = np.eye(K - 1)[i] * h, np.eye(K - 1)[j] * h
                H[i, j] = (_loglik(beta + ei + ej, counts) - _loglik(beta + ei - ej, counts)
                           - _loglik(beta - ei + ej, counts) + _loglik(beta - ei - ej, counts)) / (4 * h * h)
        J = observed_information(beta, counts.sum())
        assert np.max(np.abs(J + H)) <= 1e-6 * np.max(np.abs(J)) + 1e-6


def test_information_scalar_case_and_row_sums():
    beta = np.array([0.7])
    c2 = weights_from_beta(beta)[1]
    assert observed_information(beta, 50)[0, 0] == pytest.approx(50 * c2 * (1 - c2))
    beta = np.random.default_rng(1).normal(size=6)
    c = weights_from_beta(beta)
    J = observed_information(beta, 300)
    np.testing.assert_allclose(J.sum(axis=1), 300 * c[1:] * c[0])
    assert np.all(J.sum(axis=1) >= 0)


@settings(max_examples=50)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=20), st.integers(1, 10_000))
def test_information_psd(beta, n):
    J = observed_information(np.array(beta), n)
    assert np.linalg.eigvalsh(J).min() >= -1e-9 * max(1.0, np.abs(J).max())


def test_prior_limits():
    counts = np.array([30, 50, 80, 40])
    flat = laplace_posterior(counts, np.zeros(3), np.zeros((3, 3)))
    np.testing.assert_allclose(flat.m_n, flat.beta_hat, atol=1e-10)
    np.testing.assert_allclose(flat.J_n, flat.J_hat)
    beta0 = np.array([0.3, -0.2, 1.0])
    dog = laplace_posterior(counts, beta0, 1e12 * np.eye(3))
    np.testing.assert_allclose(dog.m_n, beta0, atol=1e-8)


def test_penalty_prior_mean_formula():
    counts = np.array([12, 30, 55, 61, 40, 20])
    pen = build_penalty(6)
    ap = penalty_laplace(counts, pen, 0.5)
    np.testing.assert_allclose(ap.A0inv, pen.Pstar / 0.5)
    np.testing.assert_allclose(ap.m_n, np.linalg.solve(ap.J_n, ap.J_hat @ ap.beta_hat))
    assert np.linalg.eigvalsh(ap.J_n).min() > 0
    np.testing.assert_allclose(ap.covariance @ ap.J_n, np.eye(5), atol=1e-10)


def test_consistency_in_n():
    p = np.array([0.1, 0.15, 0.3, 0.25, 0.2])
    labels = np.random.default_rng(2).choice(5, size=10_000, p=p)
    pen = build_penalty(5)
    gaps = []
    for n in (100, 1000, 10_000):
        counts = np.bincount(labels[:n], minlength=5)
        ap = penalty_laplace(counts, pen, 1.0)
        gaps.append(np.linalg.norm(ap.m_n - ap.beta_hat))
    assert gaps[0] > gaps[1] > gaps[2]


def test_agrees_with_hmc_chain():
    p = np.arange(1, 6) / 15
    counts = np.random.default_rng(3).multinomial(1000, p)
    pen = build_penalty(5)
    tau2 = 1.0
    ap = penalty_laplace(counts, pen, tau2)
    draws, acc = sample_beta_chain(counts, tau2, pen, HmcConfig(), RngStream(4),
                                   iters=5000, burnin=1000)
    assert acc > 0.5
    z = (ap.m_n - draws.mean(axis=0)) / draws.std(axis=0, ddof=1)
    assert np.max(np.abs(z)) <= 3
    np.testing.assert_allclose(draws.std(axis=0, ddof=1), ap.sd, rtol=0.15)
