import math

import numpy as np
import pytest
from scipy import integrate, optimize, special, stats

from postdesign.core import ConfigurationError, NumericalError
from postdesign.models import (
    DataGenProcess,
    GaussianRegressionModel,
    IntervalHypothesis,
    LogisticRegressionModel,
    NormalMeanModel,
    group_sizes,
    semaglutide_sae,
    semaglutide_weight,
)


def test_hypothesis_validation():
    with pytest.raises(ValueError):
        IntervalHypothesis(1.0, 1.0)
    h = IntervalHypothesis(0.0, 2.0)
    assert h.contains(1.0) and not h.contains(0.0) and not h.contains(2.0)


def test_group_sizes_round_half_even():
    assert group_sizes(35, 2.0) == (70, 35)
    assert group_sizes(3, 2.5) == (8, 3)
    assert group_sizes(1, 2.5) == (2, 1)


def test_data_gen_process():
    psi = DataGenProcess(1, (0.0, 10.5, 0.2), uniform=((1, 9.0, 12.0),))
    rng = np.random.default_rng(0)
    draws = np.array([psi.draw(rng) for _ in range(500)])
    assert np.all((draws[:, 1] >= 9.0) & (draws[:, 1] < 12.0))
    assert np.all(draws[:, 0] == 0.0)
    assert psi.median()[1] == 10.5
    assert sorted(e[1] for e in psi.extremes()) == [9.0, 12.0]
    assert DataGenProcess(0, (1.0,)).degenerate
    with pytest.raises(ConfigurationError):
        DataGenProcess(2, (1.0,))
    with pytest.raises(ConfigurationError):
        DataGenProcess(1, (1.0,), uniform=((0, 2.0, 1.0),))


def test_normal_flat_posterior_is_closed_form():
    model = NormalMeanModel(sigma=2.0)
    rng = np.random.default_rng(1)
    data = model.generate_data((0.3,), 25, 1.0, rng)
    p = model.posterior_prob_H1(data, IntervalHypothesis(0.0, math.inf))
    assert p == pytest.approx(special.ndtr(data.y.mean() * 5 / 2.0))


def test_normal_conjugate_posterior():
    model = NormalMeanModel(sigma=1.0, prior_mean=1.0, prior_sd=0.5)
    y = np.array([[0.2, -0.1, 0.4, 0.0]])
    mean, sd = model.posterior_moments(y)
    prec = 4 + 4
    assert mean[0] == pytest.approx((4 * 1.0 + 4 * y.mean()) / prec)
    assert sd[0] == pytest.approx(prec**-0.5)


def _nig_quadrature(model, y, X, lo):
    """P(b1 > lo | y) by integrating the conditional normal over sigma^2."""
    mun, Ln, an, bn = model.posterior_params(y[None], X[None])
    mu, V = mun[0, 1], np.linalg.inv(Ln[0])[1, 1]
    ig = stats.invgamma(an, scale=bn[0])

    def f(s2):
        return ig.pdf(s2) * special.ndtr((mu - lo) / math.sqrt(s2 * V))

    lo_s, hi_s = ig.ppf(1e-12), ig.ppf(1 - 1e-12)
    val, _ = integrate.quad(f, lo_s, hi_s, limit=200, epsabs=1e-13)
    return val


@pytest.mark.parametrize("n_B,b1", [(10, 6.0), (35, 10.5), (60, 5.0)])
def test_nig_marginal_matches_quadrature(n_B, b1):
    model = GaussianRegressionModel()
    rng = np.random.default_rng(n_B)
    d = model.generate_data((-25.75, b1, 0.25), n_B, 2.0, rng)
    hyp = IntervalHypothesis(5.0, math.inf)
    p = model.posterior_prob_H1(d, hyp)
    assert p == pytest.approx(_nig_quadrature(model, d.y, d.X, 5.0), abs=1e-8)


def test_nig_posterior_matches_direct_algebra():
    model = GaussianRegressionModel()
    rng = np.random.default_rng(3)
    d = model.generate_data((-25.75, 10.0, 0.25), 20, 2.0, rng)
    L0 = np.eye(3) * 0.01
    Ln = d.X.T @ d.X + L0
    mun = np.linalg.solve(Ln, d.X.T @ d.y)
    an = 1.0 + d.n / 2
    bn = 1.0 + 0.5 * (d.y @ d.y - mun @ Ln @ mun)
    got = model.posterior_params(d.y[None], d.X[None])
    assert got[0][0] == pytest.approx(mun)
    assert got[2] == an
    assert got[3][0] == pytest.approx(bn)


def test_regression_fisher_info():
    model = GaussianRegressionModel()
    # for q = 2 the treatment coefficient has per-n_B information 1/(1.5 sigma^2)
    assert model.fisher_info(None, 2.0) == pytest.approx(1 / (1.5 * 10.07**2))


def test_regression_fisher_info_matches_ols_variance():
    model = GaussianRegressionModel()
    rng = np.random.default_rng(5)
    n_B, reps = 150, 3000
    est = []
    for _ in range(reps):
        d = model.generate_data((-25.75, 10.0, 0.25), n_B, 2.0, rng)
        est.append(np.linalg.lstsq(d.X, d.y, rcond=None)[0][1])
    var = np.var(est, ddof=1)
    # sampling sd of a variance estimate is about sqrt(2/reps) ~ 2.6%
    assert var * n_B == pytest.approx(1 / model.fisher_info(None, 2.0), rel=0.1)


def test_logistic_fisher_info_matches_monte_carlo():
    model = LogisticRegressionModel()
    eta = (-2.71, math.log(1.25), 0.25)
    rng = np.random.default_rng(11)
    x2 = rng.normal(0, 1, 400_000)
    info = np.zeros((3, 3))
    for x1, w in ((1.0, 2.0), (0.0, 1.0)):
        p = special.expit(eta[0] + eta[1] * x1 + eta[2] * x2)
        X = np.stack([np.ones_like(x2), np.full_like(x2, x1), x2], axis=1)
        info += w * (X * (p * (1 - p))[:, None]).T @ X / x2.size
    mc = 1 / np.linalg.inv(info)[1, 1]
    assert model.fisher_info(eta, 2.0) == pytest.approx(mc, rel=5e-3)


def test_logistic_laplace_mode_and_curvature():
    model = LogisticRegressionModel()
    rng = np.random.default_rng(2)
    d = model.generate_data((-1.0, 0.5, 0.25), 40, 2.0, rng)
    mode, cov, ok = model.laplace(d.y[None], d.X[None])
    assert ok[0]
    mu0 = np.array(model.prior_mean)
    prec = 1 / np.array(model.prior_sd) ** 2

    def neg(b):
        eta = d.X @ b
        return -(np.sum(d.y * eta - np.logaddexp(0, eta)) - 0.5 * np.sum(prec * (b - mu0) ** 2))

    ref = optimize.minimize(neg, mu0, method="BFGS", options={"gtol": 1e-10})
    assert mode[0] == pytest.approx(ref.x, abs=1e-5)
    p = special.expit(d.X @ ref.x)
    H = d.X.T @ (d.X * (p * (1 - p))[:, None]) + np.diag(prec)
    assert cov[0] == pytest.approx(np.linalg.inv(H), rel=1e-5)


def test_logistic_posterior_prob_uses_log_odds_ratio():
    model = LogisticRegressionModel()
    rng = np.random.default_rng(4)
    d = model.generate_data((-2.71, 0.0, 0.25), 50, 2.0, rng)
    mode, cov, _ = model.laplace(d.y[None], d.X[None])
    p = model.posterior_prob_H1(d, IntervalHypothesis(-math.inf, 2.0))
    assert p == pytest.approx(special.ndtr((math.log(2) - mode[0, 1]) / math.sqrt(cov[0, 1, 1])))
    assert model.theta((0.0, math.log(2), 0.0)) == pytest.approx(2.0)


def test_posterior_failure_raises():
    model = LogisticRegressionModel(max_iter=1)
    rng = np.random.default_rng(0)
    d = model.generate_data((-2.71, 0.0, 0.25), 30, 2.0, rng)
    with pytest.raises(NumericalError):
        model.posterior_prob_H1(d, IntervalHypothesis(-math.inf, 2.0))


def test_with_theta():
    assert list(LogisticRegressionModel().with_theta((1.0, 0.0, 2.0), 2.0)) == [1.0, math.log(2.0), 2.0]
    assert list(GaussianRegressionModel().with_theta((1.0, 0.0, 2.0), 7.0)) == [1.0, 7.0, 2.0]


def test_example_setups():
    w = semaglutide_weight()
    assert (w.alpha, w.beta, w.q, w.m, w.subgroups) == (0.05, 0.2, 2.0, 10_000, 10)
    assert w.hypothesis == IntervalHypothesis(5.0, math.inf)
    s = semaglutide_sae()
    assert (s.alpha, s.beta) == (0.4, 0.25)
    assert s.hypothesis == IntervalHypothesis(-math.inf, 2.0)
