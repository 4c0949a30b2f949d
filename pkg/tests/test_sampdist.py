import math

import numpy as np
import pytest
from scipy import stats

from postdesign.core import NumericalError
from postdesign.models import DataGenProcess, IntervalHypothesis, LogisticRegressionModel, NormalMeanModel
from postdesign.sampdist import (
    OCEstimate,
    SampDist,
    criteria_met,
    estimate,
    feasible,
    meets_by_thresholds,
    oc_estimate,
    thresholds,
)

TOY = NormalMeanModel(sigma=1.0)
H = IntervalHypothesis(0.0, math.inf)
PSI0 = DataGenProcess(0, (0.0,))
PSI1 = DataGenProcess(1, (0.6,))


def _sd(j, probs, n=10.0):
    probs = np.asarray(probs, float)
    from postdesign.core import logit

    return SampDist(j, n, probs, logit(probs), np.zeros(probs.size))


def test_estimate_shape_and_lineage():
    sd = estimate(TOY, H, PSI1, 10, 1.0, 300, seed=3, phase=2)
    assert sd.m == 300 and sd.j == 1 and sd.n == 10
    assert (sd.seed, sd.phase, sd.r0) == (3, 2, 0)
    assert np.all((sd.probs >= 0) & (sd.probs <= 1))
    assert np.all(sd.thetas == 0.6)
    rows = list(sd.rows())
    assert len(rows) == 300 and rows[0][0] == 1


def test_estimate_single_repetition():
    sd = estimate(TOY, H, PSI1, 10, 1.0, 1, seed=0)
    assert sd.m == 1
    assert float(np.mean(sd.probs >= 0.9)) in (0.0, 1.0)
    # a single repetition cannot support the order-statistic criteria
    with pytest.raises(ValueError):
        oc_estimate(sd, estimate(TOY, H, PSI0, 10, 1.0, 1, seed=0), 0.9, 0.5, 0.5)


def test_estimate_is_thread_invariant():
    a = estimate(TOY, H, PSI1, 12, 1.0, 1500, seed=9, threads=1)
    b = estimate(TOY, H, PSI1, 12, 1.0, 1500, seed=9, threads=3)
    assert np.array_equal(a.probs, b.probs)


def test_estimate_extends_by_lanes():
    full = estimate(TOY, H, PSI0, 8, 1.0, 700, seed=1)
    head = estimate(TOY, H, PSI0, 8, 1.0, 300, seed=1)
    tail = estimate(TOY, H, PSI0, 8, 1.0, 400, seed=1, r0=300)
    assert np.array_equal(head.concat(tail).probs, full.probs)


def test_estimate_rejects_small_n():
    with pytest.raises(ValueError):
        estimate(TOY, H, PSI0, 1, 1.0, 10, seed=0)
    with pytest.raises(ValueError):
        estimate(TOY, H, PSI0, 10, 1.0, 0, seed=0)


def test_null_uniformity_flat_prior():
    sd = estimate(TOY, H, PSI0, 20, 1.0, 10_000, seed=0)
    assert stats.kstest(sd.probs, "uniform").statistic < 0.0163


def test_repeated_posterior_failures_raise():
    model = LogisticRegressionModel(max_iter=1)
    psi = DataGenProcess(0, (-2.71, math.log(2), 0.25))
    with pytest.raises(NumericalError):
        estimate(model, IntervalHypothesis(-math.inf, 2.0), psi, 30, 2.0, 20, seed=0)


def test_oc_counts():
    sd1 = _sd(1, [0.2, 0.8, 0.9, 0.95])
    sd0 = _sd(0, [0.1, 0.3, 0.5, 0.9])
    oc = oc_estimate(sd1, sd0, 0.85, 0.25, 0.25)
    assert oc.power == 0.5 and oc.type1 == 0.25


def test_threshold_ranks():
    v = np.arange(1, 11) / 20.0
    # floor(10 * 0.25) + 1 = 3rd and ceil(10 * 0.6) = 6th, one ulp up
    assert thresholds(v, 1, 0.4, 0.25) == v[2]
    assert thresholds(v, 0, 0.4, 0.25) == np.nextafter(v[5], 1.0)


def test_threshold_rejects_too_small_m():
    with pytest.raises(ValueError):
        thresholds(np.array([0.5, 0.6, 0.7]), 1, 0.05, 0.2)


def test_oc_requires_matching_m():
    with pytest.raises(ValueError):
        oc_estimate(_sd(1, [0.5] * 5), _sd(0, [0.5] * 6), 0.5, 0.2, 0.2)


def _oc(xi0, xi1):
    return OCEstimate(10, 0.95, 0.8, 0.05, xi1, xi0, 0, 0, 0.05, 0.2, 100)


def test_feasible_by_thresholds():
    assert _oc(0.93, 0.96).feasible
    assert not _oc(0.97, 0.96).feasible
    for g in (0.93, 0.945, 0.96):
        assert meets_by_thresholds(_oc(0.93, 0.96), g)


def test_criteria_met_agrees_with_thresholds():
    rng = np.random.default_rng(0)
    for _ in range(200):
        m = int(rng.integers(5, 120))
        p1, p0 = np.round(rng.beta(4, 1, m), 2), np.round(rng.beta(1, 4, m), 2)
        sd1, sd0 = _sd(1, p1), _sd(0, p0)
        for g in np.unique(np.concatenate([p1, p0])):
            oc = oc_estimate(sd1, sd0, g, 0.2, 0.2)
            assert criteria_met(oc) == meets_by_thresholds(oc, g) == oc.criteria_met
        any_g = any(oc_estimate(sd1, sd0, g, 0.2, 0.2).criteria_met for g in np.unique(np.concatenate([p1, p0, [1.0]])))
        assert feasible(sd1, sd0, 0.2, 0.2) == any_g
