"""Numeric primitives shared by every other module.

Probability/logit transforms, order statistics, the standard normal and
Student-t distribution functions, and lane-keyed random streams.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import special

DEFAULT_EPS = 1e-12


class DesignError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(DesignError, ValueError):
    """Invalid design input or option."""


class InfeasibleError(DesignError):
    """No design satisfies the operating-characteristic criteria."""

    def __init__(self, message: str, trace=None, largest_probe=None):
        super().__init__(message)
        self.trace = trace
        self.largest_probe = largest_probe


class NumericalError(DesignError, ArithmeticError):
    """A posterior computation failed (e.g. the Laplace mode did not converge)."""

    def __init__(self, message: str, lanes=()):
        super().__init__(message)
        self.lanes = tuple(lanes)


class CapabilityError(DesignError):
    """The model does not support the requested quantity."""


def _check_eps(eps: float) -> None:
    if not 0.0 < eps < 0.5:
        raise ConfigurationError(f"logit clamp eps must lie in (0, 0.5); got {eps}")


def logit(p, eps: float = DEFAULT_EPS):
    """Clamped logit, ``log(p'/(1-p'))`` with ``p' = clip(p, eps, 1-eps)``.

    Accepts scalars or arrays; returns the same kind.
    """
    _check_eps(eps)
    arr = np.clip(np.asarray(p, dtype=float), eps, 1.0 - eps)
    out = np.log(arr) - np.log1p(-arr)
    return float(out) if out.ndim == 0 else out


def inv_logit(l):
    """Logistic function; inverse of :func:`logit` on ``[eps, 1-eps]``."""
    out = special.expit(np.asarray(l, dtype=float))
    return float(out) if out.ndim == 0 else out


def xi(a: int, b) -> float:
    """The ``a``-th smallest element (1-based) of ``b``, ties counted."""
    arr = np.asarray(b, dtype=float).ravel()
    if not 1 <= a <= arr.size:
        raise IndexError(f"order statistic rank {a} outside 1..{arr.size}")
    return float(np.partition(arr, a - 1)[a - 1])


def std_normal_cdf(x):
    out = special.ndtr(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def std_normal_quantile(p):
    arr = np.asarray(p, dtype=float)
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise ValueError("normal quantile requires 0 < p < 1")
    out = special.ndtri(arr)
    return float(out) if out.ndim == 0 else out


def student_t_cdf(x, dof):
    dof = np.asarray(dof, dtype=float)
    if np.any(dof <= 0):
        raise ValueError("Student-t degrees of freedom must be positive")
    out = special.stdtr(dof, np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def _exact(x: float) -> Fraction:
    # repr() is the shortest round-tripping decimal, so 0.2 -> 1/5 exactly.
    return Fraction(repr(float(x)))


def power_rank(m: int, beta: float) -> int:
    """Rank of the H1 order statistic that decides the power criterion.

    ``#{p >= g} >= m(1-beta)`` holds iff the ``floor(m*beta) + 1``-th smallest
    probability is at least ``g``.
    """
    k = math.floor(m * _exact(beta))
    if k < 1:
        raise ValueError(f"m={m} is too small for beta={beta}: floor(m*beta) < 1")
    return k + 1


def type1_rank(m: int, alpha: float) -> int:
    """``ceil(m*(1-alpha))``: rank of the H0 order statistic for the type I criterion."""
    k = math.ceil(m * (1 - _exact(alpha)))
    return min(max(k, 1), m)


@functools.lru_cache(maxsize=64)
def _philox_key(root_seed: int) -> tuple[int, int]:
    k = np.random.SeedSequence(root_seed % 2**64).generate_state(2, np.uint64)
    return int(k[0]), int(k[1])


@dataclass(frozen=True)
class RngStream:
    """Random stream for one simulation lane.

    Counter-based: the Philox key comes from ``root_seed`` and the lane
    ``(phase, j, r, attempt)`` occupies the upper words of the 256-bit counter,
    so every lane owns a disjoint block of the key's output sequence.  Draws
    depend only on the lane, never on visiting order or thread count.
    """

    root_seed: int
    j: int
    r: int
    phase: int = 0
    attempt: int = 0

    def _state(self) -> dict:
        counter = np.array([0, self.r, (self.phase << 8) | self.j, self.attempt], dtype=np.uint64)
        return {
            "bit_generator": "Philox",
            "state": {"counter": counter, "key": np.array(_philox_key(self.root_seed), dtype=np.uint64)},
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }

    def generator(self, reuse: np.random.Generator | None = None) -> np.random.Generator:
        """Generator positioned at the start of this lane.

        Passing ``reuse`` re-seats an existing Philox generator instead of
        allocating one (cheaper inside tight loops; not thread-safe).
        """
        if reuse is None:
            reuse = np.random.Generator(np.random.Philox(key=0))
        reuse.bit_generator.state = self._state()
        return reuse
