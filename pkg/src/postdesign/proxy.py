"""Large-sample proxy for posterior probabilities and the limiting logit slope.

Given a CDF-inversion point ``u`` and the true estimand ``theta`` with Fisher
information ``info``, the proxy probability of ``theta < delta`` at sample
size ``n`` is ``Phi(a(delta, theta) * sqrt(n) - Phi^{-1}(u))`` with
``a(delta, theta) = (delta - theta) * sqrt(info)``.  Its logit for an
interval hypothesis grows linearly in ``n`` with the slope returned by
:func:`limiting_slope`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .models import IntervalHypothesis


@dataclass(frozen=True)
class ProxyPoint:
    u: float
    theta: float
    info: float

    def __post_init__(self):
        if not 0.0 <= self.u <= 1.0:
            raise ValueError(f"u must lie in [0, 1]; got {self.u}")
        if not self.info > 0:
            raise ValueError(f"Fisher information must be positive; got {self.info}")


def standardized_distance(delta, theta, info):
    """``(delta - theta) / sqrt(1/info)``; infinite when ``delta`` is."""
    return (np.asarray(delta, float) - theta) * np.sqrt(info)


def _probit(u: float) -> float:
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie strictly inside (0, 1) for the proxy")
    return float(special.ndtri(u))


def _endpoint_args(pt: ProxyPoint, hyp: IntervalHypothesis, n: float):
    b = _probit(pt.u)
    root = math.sqrt(n)
    x = standardized_distance(hyp.upper, pt.theta, pt.info) * root - b
    y = standardized_distance(hyp.lower, pt.theta, pt.info) * root - b
    return float(x), float(y)


def _log_ndtr_diff(x: float, y: float) -> float:
    """``log(Phi(x) - Phi(y))`` for ``x > y`` without cancellation."""
    if y == -math.inf:
        return float(special.log_ndtr(x))
    if x == math.inf:
        return float(special.log_ndtr(-y))
    if y > 0:
        # both in the upper tail: Phi(-y) - Phi(-x)
        x, y = -y, -x
    lx, ly = special.log_ndtr(x), special.log_ndtr(y)
    return float(lx + np.log1p(-np.exp(ly - lx)))


def _log_ndtr_complement(x: float, y: float) -> float:
    """``log(1 - (Phi(x) - Phi(y)))`` = ``log(Phi(-x) + Phi(y))``."""
    return float(np.logaddexp(special.log_ndtr(-x), special.log_ndtr(y)))


def proxy_prob(pt: ProxyPoint, hyp: IntervalHypothesis, n: float) -> float:
    if n <= 0:
        raise ValueError("n must be positive")
    x, y = _endpoint_args(pt, hyp, n)
    return math.exp(_log_ndtr_diff(x, y))


def proxy_logit(pt: ProxyPoint, hyp: IntervalHypothesis, n: float) -> float:
    """Logit of :func:`proxy_prob` computed in log space (finite for huge ``n``)."""
    if n <= 0:
        raise ValueError("n must be positive")
    x, y = _endpoint_args(pt, hyp, n)
    return _log_ndtr_diff(x, y) - _log_ndtr_complement(x, y)


def limiting_slope(theta, hyp: IntervalHypothesis, info):
    """Limit of d/dn logit(proxy probability) as ``n`` grows.

    ``(0.5 - 1{theta outside (lower, upper)}) * min(a(upper)^2, a(lower)^2)``.
    Vectorised over ``theta`` and ``info``.
    """
    if math.isinf(hyp.lower) and math.isinf(hyp.upper):
        raise ValueError("an unbounded hypothesis has no finite limiting slope")
    theta = np.asarray(theta, float)
    a_u = standardized_distance(hyp.upper, theta, info)
    a_l = standardized_distance(hyp.lower, theta, info)
    sq = np.minimum(a_u**2, a_l**2)
    outside = ~((hyp.lower < theta) & (theta < hyp.upper))
    out = (0.5 - outside) * sq
    return float(out) if out.ndim == 0 else out


def numeric_slope(pt: ProxyPoint, hyp: IntervalHypothesis, n: float, h: float | None = None) -> float:
    """Central difference of the proxy logit at ``n`` with step ``h`` (default n/1000)."""
    h = n / 1000.0 if h is None else h
    if not 0 < h < n:
        raise ValueError("step must satisfy 0 < h < n")
    hi, lo = proxy_logit(pt, hyp, n + h), proxy_logit(pt, hyp, n - h)
    if not (math.isfinite(hi) and math.isfinite(lo)):
        raise ArithmeticError(f"proxy logit not representable near n={n}; use a smaller n")
    return (hi - lo) / (2.0 * h)


@dataclass(frozen=True)
class ProxyCase:
    label: str
    theta: float
    lower: float
    upper: float
    u: float
    info: float = 1.0

    @property
    def hypothesis(self) -> IntervalHypothesis:
        return IntervalHypothesis(self.lower, self.upper)

    @property
    def point(self) -> ProxyPoint:
        return ProxyPoint(self.u, self.theta, self.info)


inf = math.inf

# Covers every branch of the limit: inside with |a| < |c|, |a| > |c| and
# |a| = |c|; theta on either endpoint; theta outside on either side; one- and
# two-sided intervals.
VERIFICATION_CASES = (
    ProxyCase("inside |a|<|c|", 0.0, -1.0, 0.5, 0.5),
    ProxyCase("inside |a|<|c| u=0.3", 0.2, -1.0, 0.8, 0.3, 1.5),
    ProxyCase("inside |a|>|c|", 0.0, -0.5, 1.0, 0.3),
    ProxyCase("inside |a|=|c|", 0.0, -0.8, 0.8, 0.5),
    ProxyCase("inside |a|=|c| u=0.7", 0.0, -0.8, 0.8, 0.7),
    ProxyCase("inside one-sided (L, inf)", 1.0, 0.0, inf, 0.6),
    ProxyCase("inside one-sided (-inf, U)", -1.0, -inf, 0.0, 0.4, 0.5),
    ProxyCase("boundary theta=U", 1.0, -1.0, 1.0, 0.5),
    ProxyCase("boundary theta=L", -1.0, -1.0, 1.0, 0.8),
    ProxyCase("boundary one-sided theta=L", 0.0, 0.0, inf, 0.3),
    ProxyCase("boundary one-sided theta=U", 0.0, -inf, 0.0, 0.6),
    ProxyCase("outside above", 2.0, -1.0, 1.0, 0.5),
    ProxyCase("outside below", -1.5, -1.0, 1.0, 0.2),
    ProxyCase("outside one-sided below L", -0.5, 0.0, inf, 0.6),
    ProxyCase("outside one-sided above U", 0.7, -inf, 0.0, 0.5, 2.0),
)

CHECK_SIZES = (1e3, 1e4, 1e5, 1e6)


def proxy_check(cases=VERIFICATION_CASES, sizes=CHECK_SIZES) -> list[dict]:
    """Numeric versus limiting slope for every case and size."""
    rows = []
    for case in cases:
        hyp, pt = case.hypothesis, case.point
        analytic = limiting_slope(case.theta, hyp, case.info)
        for n in sizes:
            num = numeric_slope(pt, hyp, n)
            rows.append(
                {
                    "case": case.label,
                    "n": n,
                    "numeric": num,
                    "analytic": analytic,
                    "error": abs(num - analytic),
                }
            )
    return rows
