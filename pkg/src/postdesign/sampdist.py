"""Sampling distributions of posterior probabilities at a fixed sample size.

:func:`estimate` runs the repetition loop: draw ``eta_plus`` from the design
prior, generate a dataset, and compute the posterior probability of H1.
:func:`oc_estimate` turns a pair of sampling distributions into power, type I
error and the order-statistic thresholds that decide both criteria.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import DEFAULT_EPS, NumericalError, RngStream, logit, power_rank, type1_rank
from .models import DataGenProcess, IntervalHypothesis, Model

log = logging.getLogger(__name__)

CHUNK = 512
MAX_FAIL_FRACTION = 0.001
MAX_ATTEMPTS = 8


@dataclass(frozen=True)
class SampDist:
    """Posterior probabilities from ``m`` repetitions under hypothesis ``j``.

    ``thetas`` holds the true estimand (natural scale) behind each repetition.
    ``seed``/``phase``/``r0`` record which lanes produced the draws.
    """

    j: int
    n: float
    probs: np.ndarray
    logits: np.ndarray
    thetas: np.ndarray
    seed: int | None = None
    phase: int | None = None
    r0: int = 0

    @property
    def m(self) -> int:
        return int(self.probs.size)

    def take(self, idx) -> "SampDist":
        """Sub-sample (or resample) rows; lineage is dropped."""
        return SampDist(self.j, self.n, self.probs[idx], self.logits[idx], self.thetas[idx])

    def concat(self, other: "SampDist") -> "SampDist":
        if other.j != self.j or other.n != self.n:
            raise ValueError("can only concatenate draws for the same hypothesis and size")
        return SampDist(
            self.j,
            self.n,
            np.concatenate([self.probs, other.probs]),
            np.concatenate([self.logits, other.logits]),
            np.concatenate([self.thetas, other.thetas]),
            self.seed,
            self.phase,
            self.r0,
        )

    def rows(self):
        for r in range(self.m):
            yield self.r0 + r + 1, self.thetas[r], self.probs[r], self.logits[r]


def _simulate_lanes(model, hyp, psi, n_B, q, seed, phase, lanes, attempt):
    ys, Xs, thetas = [], [], []
    rng = None
    for r in lanes:
        rng = RngStream(seed, psi.j, int(r), phase, attempt).generator(rng)
        eta = psi.draw(rng)
        data = model.generate_data(eta, n_B, q, rng)
        ys.append(data.y)
        Xs.append(data.X)
        thetas.append(model.theta(eta))
    probs, ok = model.posterior_batch(np.stack(ys), np.stack(Xs), hyp)
    return probs, ok, np.asarray(thetas)


def _run_chunk(args):
    model, hyp, psi, n_B, q, seed, phase, lanes = args
    probs, ok, thetas = _simulate_lanes(model, hyp, psi, n_B, q, seed, phase, lanes, 0)
    first_failures = int((~ok).sum())
    attempt = 0
    while not ok.all():
        attempt += 1
        bad = np.flatnonzero(~ok)
        if attempt > MAX_ATTEMPTS:
            raise NumericalError(
                f"repetitions kept failing after {MAX_ATTEMPTS} redraws",
                lanes=[(psi.j, int(lanes[i])) for i in bad],
            )
        p2, ok2, t2 = _simulate_lanes(model, hyp, psi, n_B, q, seed, phase, lanes[bad], attempt)
        probs[bad], thetas[bad] = p2, t2
        ok[bad] = ok2
    return probs, thetas, first_failures


def estimate(
    model: Model,
    hyp: IntervalHypothesis,
    psi: DataGenProcess,
    n_B: int,
    q: float,
    m: int,
    seed: int,
    phase: int = 0,
    r0: int = 0,
    threads: int = 1,
    eps: float = DEFAULT_EPS,
) -> SampDist:
    """Estimate the sampling distribution of Pr(H1 | data) under ``psi``.

    Repetition ``r`` draws from lane ``(seed, phase, psi.j, r0 + r)``, so the
    output is identical for any ``threads`` and a run over lanes
    ``[r0, r0 + m)`` can be appended to an earlier run to extend it.

    Datasets whose posterior fails are redrawn on a fresh sub-lane; the run is
    aborted if more than 0.1% of repetitions fail at the first attempt.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if int(n_B) != n_B or n_B < model.min_n:
        raise ValueError(f"sample size {n_B} below the model minimum {model.min_n}")
    n_B = int(n_B)
    lanes = np.arange(r0, r0 + m)
    jobs = [
        (model, hyp, psi, n_B, q, seed, phase, lanes[i : i + CHUNK])
        for i in range(0, m, CHUNK)
    ]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(job) for job in jobs]
    failures = sum(r[2] for r in results)
    if failures > MAX_FAIL_FRACTION * m:
        raise NumericalError(
            f"{failures} of {m} repetitions failed at n={n_B} (j={psi.j})",
            lanes=[(psi.j, None)],
        )
    if failures:
        log.warning("redrew %d failed repetitions at n=%d (j=%d)", failures, n_B, psi.j)
    probs = np.concatenate([r[0] for r in results])
    thetas = np.concatenate([r[1] for r in results])
    return SampDist(psi.j, n_B, probs, logit(probs, eps), thetas, seed, phase, r0)


@dataclass(frozen=True)
class OCEstimate:
    """Operating characteristics at ``(n, gamma)`` plus the deciding thresholds.

    ``xi1`` is the largest critical value meeting the power criterion and
    ``xi0`` the smallest meeting the type I criterion, both on the probability
    scale; ``*_logit`` are the same thresholds on the clamped logit scale.
    """

    n: float
    gamma: float
    power: float
    type1: float
    xi1: float
    xi0: float
    xi1_logit: float
    xi0_logit: float
    alpha: float
    beta: float
    m: int

    @property
    def criteria_met(self) -> bool:
        return criteria_met(self)

    @property
    def feasible(self) -> bool:
        return self.xi0 <= self.xi1


def thresholds(values: np.ndarray, j: int, alpha: float, beta: float) -> float:
    """Deciding order statistic of ``values`` for hypothesis ``j``.

    For H1 this is the ``floor(m*beta) + 1``-th smallest value: the power
    estimate is at least ``1 - beta`` iff it is ``>= gamma``.  For H0 it is the
    value just above the ``ceil(m*(1-alpha))``-th smallest (one ulp up), so
    the type I estimate is at most ``alpha`` iff it is ``<= gamma``.
    """
    v = np.asarray(values, float)
    m = v.size
    if j == 1:
        k = power_rank(m, beta)
        return float(np.partition(v, k - 1)[k - 1])
    k = type1_rank(m, alpha)
    return float(np.nextafter(np.partition(v, k - 1)[k - 1], math.inf))


def oc_estimate(sd1: SampDist, sd0: SampDist, gamma: float, alpha: float, beta: float) -> OCEstimate:
    if sd1.m != sd0.m:
        raise ValueError("sampling distributions must have the same m")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be a probability; got {gamma}")
    return OCEstimate(
        n=sd1.n,
        gamma=float(gamma),
        power=float(np.mean(sd1.probs >= gamma)),
        type1=float(np.mean(sd0.probs >= gamma)),
        xi1=thresholds(sd1.probs, 1, alpha, beta),
        xi0=thresholds(sd0.probs, 0, alpha, beta),
        xi1_logit=thresholds(sd1.logits, 1, alpha, beta),
        xi0_logit=thresholds(sd0.logits, 0, alpha, beta),
        alpha=alpha,
        beta=beta,
        m=sd1.m,
    )


def criteria_met(oc: OCEstimate) -> bool:
    """Power >= 1 - beta and type I error <= alpha at ``oc.gamma``.

    Compared in exact rational arithmetic on the repetition counts.
    """
    power = Fraction(round(oc.power * oc.m), oc.m)
    type1 = Fraction(round(oc.type1 * oc.m), oc.m)
    return power >= 1 - Fraction(repr(oc.beta)) and type1 <= Fraction(repr(oc.alpha))


def meets_by_thresholds(oc: OCEstimate, gamma: float) -> bool:
    """Same decision as :func:`criteria_met`, read off the thresholds."""
    return oc.xi1 >= gamma and oc.xi0 <= gamma


def feasible(sd1: SampDist, sd0: SampDist, alpha: float, beta: float) -> bool:
    """Some critical value meets both criteria at this sample size."""
    return thresholds(sd0.probs, 0, alpha, beta) <= thresholds(sd1.probs, 1, alpha, beta)
