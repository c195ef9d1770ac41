import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from densecraft.estimate import SampleSet
from densecraft.pgm import (
    HmcConfig,
    PenaltyMatrix,
    PgmConfig,
    build_grid,
    build_penalty,
    conditional_mode,
    fit_pgm,
    grad_neg_log_posterior,
    hmc_step,
    indicator_log_probs,
    leapfrog,
    mixture_pdf,
    neg_log_posterior,
    sample_a,
    sample_beta_chain,
    sample_indicators,
    sample_tau2,
    weights_from_beta,
)
from densecraft.stochastics import InvalidParameterError, RngStream, draw_inverse_gamma


def test_grid():
    g = build_grid((0.0, 1.0), 5)
    np.testing.assert_allclose(g.means, [0, 0.25, 0.5, 0.75, 1.0])
    assert g.sigma == pytest.approx(1 / 6)
    with pytest.raises(InvalidParameterError):
        build_grid((0.0, 1.0), 3)


@given(st.integers(4, 200), st.floats(-100, 100), st.floats(0.01, 100))
def test_grid_spacing_constant(K, a, width):
    g = build_grid((a, a + width), K)
    gaps = np.diff(g.means)
    np.testing.assert_allclose(gaps, gaps[0], rtol=1e-9, atol=1e-12)
    assert g.sigma == pytest.approx(2 / 3 * gaps[0], rel=1e-9)


def test_softmax_cases():
    np.testing.assert_allclose(weights_from_beta(np.zeros(3)), 0.25)
    np.testing.assert_allclose(weights_from_beta([np.log(2), np.log(3)]), [1 / 6, 2 / 6, 3 / 6])
    with pytest.raises(InvalidParameterError):
        weights_from_beta([0.0, np.nan])


@given(st.lists(st.floats(-50, 50), min_size=3, max_size=40), st.floats(-20, 20))
def test_softmax_invariants(beta, shift):
    w = weights_from_beta(beta)
    assert np.all(w > 0)
    assert w.sum() == pytest.approx(1.0)
    # shifting every slot, including the pinned first one, leaves weights unchanged
    full = np.concatenate([[0.0], beta]) + shift
    w2 = np.exp(full - full.max())
    np.testing.assert_allclose(w2 / w2.sum(), w, rtol=1e-9, atol=1e-300)


def test_mixture_pdf_degenerate_and_normalised():
    g = build_grid((0.0, 1.0), 6)
    w = np.zeros(6)
    w[2] = 1.0
    x = np.linspace(-1, 2, 11)
    np.testing.assert_allclose(mixture_pdf(g, w, x), stats.norm(g.means[2], g.sigma).pdf(x))
    w = weights_from_beta(np.random.default_rng(0).normal(size=5))
    xs = np.linspace(-3, 4, 20001)
    assert np.trapezoid(mixture_pdf(g, w, xs), xs) == pytest.approx(1.0, abs=1e-8)


def test_penalty_structure():
    pen = build_penalty(10, 100.0)
    np.testing.assert_allclose(pen.P, pen.D.T @ pen.D)
    diff = pen.Pstar - pen.P
    expected = np.zeros_like(diff)
    expected[0, 0] = expected[1, 1] = 0.01
    np.testing.assert_allclose(diff, expected)
    for K in (4, 10, 30, 50, 100):
        assert np.linalg.eigvalsh(build_penalty(K, 100.0).Pstar).min() > 0


def test_penalty_kernel_linear_beta():
    K, tau2, c = 12, 0.7, 100.0
    pen = build_penalty(K, c)
    beta = np.arange(2, K + 1, dtype=float)  # beta_j = j for j = 2..K
    u = neg_log_posterior(beta, np.zeros(K), tau2, pen)
    assert u == pytest.approx(13.0 / (2 * tau2 * c))
    assert np.allclose(pen.D @ beta, 0)
    # zero start with constant (zero) differences sits in the kernel
    assert neg_log_posterior(np.zeros(K - 1), np.zeros(K), tau2, pen) == 0.0


def test_neg_log_posterior_limits():
    K = 6
    pen = build_penalty(K)
    beta = np.random.default_rng(1).normal(size=K - 1)
    counts = np.array([3, 5, 0, 7, 2, 9])
    lik = -(counts @ np.log(weights_from_beta(beta)))
    assert neg_log_posterior(beta, counts, 1e15, pen) == pytest.approx(lik, rel=1e-10)


def test_gradient_stationary_points():
    K = 8
    pen = build_penalty(K)
    g = grad_neg_log_posterior(np.zeros(K - 1), np.full(K, 5.0), 1.0, pen)
    np.testing.assert_allclose(g, 0.0, atol=1e-12)
    counts = np.array([4, 9, 1, 6, 3, 7, 2, 8], dtype=float)
    mle = np.log(counts[1:] / counts[0])
    np.testing.assert_allclose(grad_neg_log_posterior(mle, counts, 1e15, pen), 0.0, atol=1e-9)


def _fd_grad(f, x, h=1e-5):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_gradient_matches_finite_differences():
    g = np.random.default_rng(2)
    K = 10
    pen = build_penalty(K)
    for _ in range(100):
        beta = g.normal(scale=1.5, size=K - 1)
        counts = g.integers(0, 50, size=K).astype(float)
        tau2 = float(np.exp(g.uniform(-3, 3)))
        fd = _fd_grad(lambda b: neg_log_posterior(b, counts, tau2, pen), beta)
        an = grad_neg_log_posterior(beta, counts, tau2, pen)
        assert np.max(np.abs(fd - an)) <= 1e-6 * max(1.0, np.max(np.abs(an)))


def _problem():
    pen = build_penalty(10, 100.0)
    counts = np.array([3, 10, 25, 40, 60, 55, 35, 20, 8, 4], dtype=float)
    beta, ok = conditional_mode(counts, 1.0, pen)
    assert ok
    return pen, counts, beta


def test_leapfrog_reversible():
    pen, counts, beta = _problem()
    grad = lambda b: grad_neg_log_posterior(b, counts, 1.0, pen)  # noqa: E731
    p0 = np.random.default_rng(3).normal(size=beta.size)
    b1, p1 = leapfrog(beta + 0.2, p0, grad, 0.018, 10)
    b2, p2 = leapfrog(b1, -p1, grad, 0.018, 10)
    np.testing.assert_allclose(b2, beta + 0.2, atol=1e-10)
    np.testing.assert_allclose(-p2, p0, atol=1e-10)


def test_energy_error_is_second_order():
    # halving the step at fixed integration time cuts the energy error four-fold
    pen, counts, beta = _problem()
    ratios = []
    for s in range(20):
        errs = [abs(hmc_step(beta + 0.1, counts, 1.0, pen, HmcConfig(h, round(0.04 / h)),
                             RngStream(s)).energy_error) for h in (0.01, 0.005)]
        ratios.append(errs[0] / errs[1])
    assert 3.5 <= np.median(ratios) <= 4.5
    # and a tiny step is accepted essentially always
    res = [hmc_step(beta, counts, 1.0, pen, HmcConfig(1e-4, 1), RngStream(100 + s))
           for s in range(50)]
    assert all(r.accepted for r in res)
    assert max(abs(r.energy_error) for r in res) < 1e-6


def test_hmc_gaussian_target():
    d = 4
    pen = PenaltyMatrix(np.zeros((0, d)), np.eye(d), np.eye(d), 1.0)
    draws, acc = sample_beta_chain(np.zeros(d + 1), 1.0, pen, HmcConfig(0.5, 3), RngStream(4),
                                   iters=6000, burnin=1000, start=np.zeros(d))
    assert acc > 0.8
    for j in range(d):
        assert stats.kstest(draws[:, j], "norm").pvalue > 0.01


def test_hmc_divergence_is_rejection():
    pen, counts, beta = _problem()
    res = hmc_step(beta, counts, 1.0, pen, HmcConfig(50.0, 10), RngStream(5))
    assert not res.accepted
    np.testing.assert_array_equal(res.beta, beta)


def test_sample_tau2_mean():
    K, nu, a = 20, 2.0, 1.5
    pen = build_penalty(K)
    beta = np.random.default_rng(6).normal(size=K - 1) * 0.3
    rng = RngStream(7)
    draws = np.array([sample_tau2(beta, pen, a, nu, rng) for _ in range(100_000)])
    shape = (K + nu - 1) / 2
    scale = nu / a + 0.5 * beta @ pen.Pstar @ beta
    assert shape > 1
    assert draws.mean() == pytest.approx(scale / (shape - 1), rel=0.02)
    # beta = 0 collapses the scale to nu / a
    zero = np.array([sample_tau2(np.zeros(K - 1), pen, a, nu, rng) for _ in range(5000)])
    assert stats.kstest(zero, stats.invgamma(shape, scale=nu / a).cdf).pvalue > 0.01


def test_sample_a_mean():
    nu, A, tau2 = 3.0, 2.0, 0.8
    rng = RngStream(8)
    draws = np.array([sample_a(tau2, nu, A, rng) for _ in range(100_000)])
    assert np.all(draws > 0)
    shape, scale = (nu + 1) / 2, 1 / A**2 + nu / tau2
    assert draws.mean() == pytest.approx(scale / (shape - 1), rel=0.02)


def _half_t_rejection(gen, nu, A, size):
    """Half-t(nu, A) by rejection from a half-Cauchy with the same scale."""
    t = stats.t(nu)
    cauchy = stats.cauchy()
    xs = np.linspace(0, 200, 200_001)
    bound = 1.01 * np.max(t.pdf(xs) / cauchy.pdf(xs))
    out = []
    while len(out) < size:
        x = np.abs(cauchy.rvs(size=size, random_state=gen))
        keep = gen.uniform(size=size) * bound * cauchy.pdf(x) <= t.pdf(x)
        out.extend(x[keep].tolist())
    return A * np.array(out[:size])


def test_half_t_scale_mixture():
    nu, A = 2.0, 3.0
    rng = RngStream(9)
    # Gibbs on the prior alone: tau^2 | a ~ IG(nu/2, nu/a), then the package's a-update
    a, tau = 1.0, []
    for it in range(40_000):
        tau2 = float(draw_inverse_gamma(rng, nu / 2, nu / a))
        a = sample_a(tau2, nu, A, rng)
        if it % 8 == 0:
            tau.append(np.sqrt(tau2))
    oracle = _half_t_rejection(np.random.default_rng(10), nu, A, 5000)
    assert stats.ks_2samp(tau, oracle).pvalue > 0.01


def test_indicators():
    g = build_grid((0.0, 100.0), 5)  # spacing 25, sigma ~ 16.7
    g = type(g)(g.means, 1.0)  # far apart relative to the width
    x = np.repeat(g.means, 200)
    z = sample_indicators(x, g, np.full(5, 0.2), RngStream(11))
    assert np.mean(z == np.repeat(np.arange(5), 200)) >= 0.99
    w = np.zeros(5)
    w[3] = 1.0
    z = sample_indicators(np.random.default_rng(0).uniform(0, 100, 300), g, w, RngStream(12))
    assert np.all(z == 3)
    assert np.bincount(z, minlength=5).sum() == 300
    lp = indicator_log_probs(np.array([0.0]), g, np.full(5, 0.2))
    assert np.argmax(lp) == 0


def test_conditional_mode_is_stationary():
    pen, counts, beta = _problem()
    np.testing.assert_allclose(grad_neg_log_posterior(beta, counts, 1.0, pen), 0.0, atol=1e-7)


def test_fit_pgm_smoke_and_reproducible():
    x = np.random.default_rng(13).normal(size=200)
    data = SampleSet.from_values(x)
    cfg = PgmConfig(K=20, iters=600, burnin=200, seed=3)
    est = fit_pgm(data, cfg)
    assert np.trapezoid(est.mean, est.grid) == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(np.trapezoid(est.draws, est.grid, axis=1), 1.0, atol=1e-6)
    assert 0.5 < est.diagnostics["acceptance_rate"] < 0.999
    assert est.traces["beta"].shape[1] == 19
    np.testing.assert_array_equal(fit_pgm(data, cfg).mean, est.mean)
    with pytest.raises(InvalidParameterError):
        fit_pgm(data, PgmConfig(iters=10, burnin=10))
    with pytest.raises(InvalidParameterError):
        HmcConfig(0.0, 10)
