"""Statistical models: data generation, estimands, priors and posterior probabilities.

Three models ship with the package:

* :class:`NormalMeanModel` -- one-group normal mean with known variance, flat or
  conjugate normal prior.  Analytic posterior; used as the testing oracle.
* :class:`GaussianRegressionModel` -- two-group linear regression with a
  normal-inverse-gamma prior.  The treatment coefficient has a Student-t
  marginal posterior.
* :class:`LogisticRegressionModel` -- two-group logistic regression with
  independent normal priors.  Posterior by Laplace approximation.

Posterior computations are vectorised over a batch of datasets sharing the
same sample size: responses ``Y`` have shape ``(m, n)`` and designs ``X`` have
shape ``(m, n, p)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .core import CapabilityError, ConfigurationError, NumericalError, RngStream


@dataclass(frozen=True)
class IntervalHypothesis:
    """``H1: lower < theta < upper``; either endpoint may be infinite."""

    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi) or not lo < hi:
            raise ConfigurationError(f"hypothesis needs lower < upper; got ({lo}, {hi})")
        if lo == math.inf or hi == -math.inf:
            raise ConfigurationError("hypothesis endpoints point the wrong way")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, theta: float) -> bool:
        return self.lower < theta < self.upper


@dataclass(frozen=True)
class DataGenProcess:
    """Design prior Psi_j for the full parameter vector ``eta_plus``.

    A degenerate process always returns ``eta_plus``.  Entries of ``uniform``
    are ``(index, low, high)`` triples; those components are redrawn
    independently from U(low, high) in every repetition.
    """

    j: int
    eta_plus: tuple[float, ...]
    uniform: tuple[tuple[int, float, float], ...] = ()

    def __post_init__(self):
        if self.j not in (0, 1):
            raise ConfigurationError(f"hypothesis index must be 0 or 1; got {self.j}")
        object.__setattr__(self, "eta_plus", tuple(float(v) for v in self.eta_plus))
        norm = []
        for idx, lo, hi in self.uniform:
            if not 0 <= idx < len(self.eta_plus):
                raise ConfigurationError(f"uniform component {idx} out of range")
            if not lo < hi:
                raise ConfigurationError(f"uniform range needs low < high; got ({lo}, {hi})")
            norm.append((int(idx), float(lo), float(hi)))
        object.__setattr__(self, "uniform", tuple(norm))

    @property
    def degenerate(self) -> bool:
        return not self.uniform

    @property
    def kind(self) -> str:
        return "degenerate" if self.degenerate else "nondegenerate"

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        eta = np.array(self.eta_plus)
        for idx, lo, hi in self.uniform:
            eta[idx] = rng.uniform(lo, hi)
        return eta

    def median(self) -> np.ndarray:
        """Component-wise median of the process."""
        eta = np.array(self.eta_plus)
        for idx, lo, hi in self.uniform:
            eta[idx] = 0.5 * (lo + hi)
        return eta

    def extremes(self) -> list[np.ndarray]:
        """Corner points of the support (just ``eta_plus`` when degenerate)."""
        corners = [np.array(self.eta_plus)]
        for idx, lo, hi in self.uniform:
            nxt = []
            for c in corners:
                for v in (lo, hi):
                    e = c.copy()
                    e[idx] = v
                    nxt.append(e)
            corners = nxt
        return corners


@dataclass(frozen=True)
class Dataset:
    y: np.ndarray
    X: np.ndarray
    n_A: int
    n_B: int

    @property
    def n(self) -> int:
        return self.n_A + self.n_B


@dataclass(frozen=True)
class DrawRecord:
    eta_plus: np.ndarray
    theta: float


def group_sizes(n_B: int, q: float) -> tuple[int, int]:
    """``(n_A, n_B)`` with ``n_A = round(q * n_B)``, ties to even."""
    return int(round(q * n_B)), int(n_B)


def _interval_prob(cdf, loc, scale, lo, hi):
    """P(lo < Z < hi) for ``Z = loc + scale * T`` where ``cdf`` is T's CDF.

    One-sided intervals are evaluated through the complementary tail so that
    probabilities near 1 keep their precision.
    """
    if math.isinf(hi) and math.isinf(lo):
        return np.ones_like(loc)
    if math.isinf(hi):
        return cdf((loc - lo) / scale)
    if math.isinf(lo):
        return cdf((hi - loc) / scale)
    return np.clip(cdf((hi - loc) / scale) - cdf((lo - loc) / scale), 0.0, 1.0)


class Model:
    """Interface shared by the shipped models.

    ``theta`` is the estimand g(eta) on its natural scale.  ``working`` maps it
    monotonically to the scale on which posteriors are normal-like and Fisher
    information is expressed (identity except for the odds ratio).
    """

    name = "model"
    n_params = 1
    two_group = True
    estimand_index = 0

    @property
    def min_n(self) -> int:
        """Smallest sample size (on the searched scale) with a proper posterior."""
        return max(2 * self.n_params, 4)

    def theta(self, eta_plus) -> float:
        raise NotImplementedError

    def working(self, theta):
        return theta

    def working_interval(self, hyp: IntervalHypothesis) -> tuple[float, float]:
        return hyp.lower, hyp.upper

    def generate_data(self, eta_plus, n_B: int, q: float, rng: np.random.Generator) -> Dataset:
        raise NotImplementedError

    def posterior_batch(self, Y: np.ndarray, X: np.ndarray, hyp: IntervalHypothesis):
        """Return ``(probs, ok)`` for a batch; ``ok`` flags successful rows."""
        raise NotImplementedError

    def posterior_probs(self, Y, X, hyp: IntervalHypothesis) -> np.ndarray:
        probs, ok = self.posterior_batch(np.asarray(Y, float), np.asarray(X, float), hyp)
        if not np.all(ok):
            raise NumericalError(
                f"{self.name}: posterior failed for {int((~ok).sum())} dataset(s)",
                lanes=np.flatnonzero(~ok).tolist(),
            )
        return probs

    def posterior_prob_H1(self, data: Dataset, hyp: IntervalHypothesis) -> float:
        if data.n < 1:
            raise ValueError("empty dataset")
        return float(self.posterior_probs(data.y[None, :], data.X[None, :, :], hyp)[0])

    def with_theta(self, eta_plus, theta) -> np.ndarray:
        """Copy of ``eta_plus`` whose estimand component gives ``theta``."""
        eta = np.array(eta_plus, dtype=float)
        eta[self.estimand_index] = self.working(theta)
        return eta

    def fisher_info(self, eta_plus, q: float = 1.0) -> float:
        raise CapabilityError(f"{self.name} has no Fisher information formula")

    def draw_eta(self, psi: DataGenProcess, stream: RngStream | np.random.Generator) -> DrawRecord:
        rng = stream.generator() if isinstance(stream, RngStream) else stream
        eta = psi.draw(rng)
        return DrawRecord(eta, self.theta(eta))

    def sizes(self, n_B: int, q: float) -> tuple[int, int]:
        if n_B < 1 or int(n_B) != n_B:
            raise ValueError(f"sample size must be a positive integer; got {n_B}")
        if self.two_group:
            return group_sizes(int(n_B), q)
        return 0, int(n_B)


@dataclass(frozen=True)
class NormalMeanModel(Model):
    """``y ~ N(theta, sigma^2)`` with ``sigma`` known; eta_plus = ``(theta,)``.

    ``prior_sd=None`` gives the flat prior.
    """

    sigma: float = 1.0
    prior_mean: float = 0.0
    prior_sd: float | None = None

    name = "normal-mean"
    n_params = 1
    two_group = False

    def theta(self, eta_plus) -> float:
        return float(eta_plus[0])

    def generate_data(self, eta_plus, n_B, q, rng):
        _, n = self.sizes(n_B, q)
        y = rng.normal(eta_plus[0], self.sigma, n)
        return Dataset(y, np.ones((n, 1)), 0, n)

    def posterior_moments(self, Y):
        Y = np.atleast_2d(Y)
        n = Y.shape[1]
        ybar = Y.mean(axis=1)
        if self.prior_sd is None:
            return ybar, np.full_like(ybar, self.sigma / math.sqrt(n))
        prec = 1.0 / self.prior_sd**2 + n / self.sigma**2
        mean = (self.prior_mean / self.prior_sd**2 + n * ybar / self.sigma**2) / prec
        return mean, np.full_like(ybar, 1.0 / math.sqrt(prec))

    def posterior_batch(self, Y, X, hyp):
        mean, sd = self.posterior_moments(Y)
        probs = _interval_prob(special.ndtr, mean, sd, hyp.lower, hyp.upper)
        return probs, np.ones(probs.shape, bool)

    def fisher_info(self, eta_plus=None, q=1.0) -> float:
        return 1.0 / self.sigma**2


def _covariate_gram(q: float, mean: float, sd: float) -> np.ndarray:
    """Expected ``X'X / n_B`` for columns (1, group-A indicator, covariate)."""
    m2 = mean**2 + sd**2
    return np.array(
        [
            [1 + q, q, (1 + q) * mean],
            [q, q, q * mean],
            [(1 + q) * mean, q * mean, (1 + q) * m2],
        ]
    )


@dataclass(frozen=True)
class GaussianRegressionModel(Model):
    """``y = b0 + b1*x1 + b2*x2 + eps`` with ``x1`` the group-A indicator.

    eta_plus = ``(b0, b1, b2)``; the estimand is ``b1``.  Covariate ``x2`` and
    the error term are generated from normals with the given parameters.  The
    analysis prior is normal-inverse-gamma: ``beta | s2 ~ N(mu0, s2 * inv(L0))``
    and ``s2 ~ IG(a0, b0)``.
    """

    noise_sd: float = 10.07
    x2_mean: float = 115.0
    x2_sd: float = 14.5
    prior_mean: tuple[float, ...] = (0.0, 0.0, 0.0)
    prior_precision: tuple[float, ...] = (0.01, 0.01, 0.01)
    a0: float = 1.0
    b0: float = 1.0

    name = "gaussian-regression"
    n_params = 3
    two_group = True
    estimand_index = 1

    def theta(self, eta_plus) -> float:
        return float(eta_plus[1])

    def generate_data(self, eta_plus, n_B, q, rng):
        n_A, n_B = self.sizes(n_B, q)
        n = n_A + n_B
        X = np.empty((n, 3))
        X[:, 0] = 1.0
        X[:n_A, 1] = 1.0
        X[n_A:, 1] = 0.0
        X[:, 2] = rng.normal(self.x2_mean, self.x2_sd, n)
        y = X @ np.asarray(eta_plus[:3], float) + rng.normal(0.0, self.noise_sd, n)
        return Dataset(y, X, n_A, n_B)

    def _prior(self):
        L0 = np.diag(np.asarray(self.prior_precision, float))
        mu0 = np.asarray(self.prior_mean, float)
        return mu0, L0

    def posterior_params(self, Y, X):
        """NIG posterior ``(mu_n, Lambda_n, a_n, b_n)`` for each dataset."""
        mu0, L0 = self._prior()
        XtX = np.einsum("mni,mnj->mij", X, X)
        Xty = np.einsum("mni,mn->mi", X, Y)
        yty = np.einsum("mn,mn->m", Y, Y)
        Ln = XtX + L0
        mun = np.linalg.solve(Ln, (L0 @ mu0 + Xty)[..., None])[..., 0]
        an = self.a0 + 0.5 * Y.shape[1]
        quad = np.einsum("mi,mij,mj->m", mun, Ln, mun)
        bn = self.b0 + 0.5 * (yty + mu0 @ L0 @ mu0 - quad)
        return mun, Ln, an, bn

    def coef_marginal(self, Y, X, index: int = 1):
        """Location, scale and dof of the Student-t marginal of one coefficient."""
        mun, Ln, an, bn = self.posterior_params(Y, X)
        var = np.linalg.inv(Ln)[:, index, index]
        scale = np.sqrt(bn / an * var)
        return mun[:, index], scale, 2.0 * an

    def posterior_batch(self, Y, X, hyp):
        loc, scale, dof = self.coef_marginal(Y, X)
        lo, hi = self.working_interval(hyp)

        def cdf(z):
            return special.stdtr(dof, z)

        probs = _interval_prob(cdf, loc, scale, lo, hi)
        ok = np.isfinite(probs) & (scale > 0)
        return np.where(ok, probs, np.nan), ok

    def fisher_info(self, eta_plus=None, q=1.0) -> float:
        """Information for ``b1`` per unit of ``n_B``."""
        G = _covariate_gram(q, self.x2_mean, self.x2_sd)
        return 1.0 / (self.noise_sd**2 * np.linalg.inv(G)[1, 1])


@dataclass(frozen=True)
class LogisticRegressionModel(Model):
    """``logit P(y=1) = b0 + b1*x1 + b2*x2`` with ``x1`` the group-A indicator.

    eta_plus = ``(b0, b1, b2)``; the estimand is the odds ratio ``exp(b1)``
    and posteriors are computed for ``b1`` against the log-transformed
    hypothesis.  The posterior is a Laplace approximation around the mode
    found by damped Newton iterations.
    """

    prior_mean: tuple[float, ...] = (-2.71, 0.0, 0.0)
    prior_sd: tuple[float, ...] = (1.0, 10.0, 10.0)
    x2_mean: float = 0.0
    x2_sd: float = 1.0
    max_iter: int = 100
    grad_tol: float = 1e-8

    name = "logistic-regression"
    n_params = 3
    two_group = True
    estimand_index = 1

    def theta(self, eta_plus) -> float:
        return math.exp(eta_plus[1])

    def working(self, theta):
        return np.log(theta)

    def working_interval(self, hyp):
        if hyp.upper <= 0:
            raise ConfigurationError("odds-ratio hypothesis must have a positive upper endpoint")
        lo = math.log(hyp.lower) if hyp.lower > 0 else -math.inf
        hi = math.log(hyp.upper) if math.isfinite(hyp.upper) else math.inf
        return lo, hi

    def generate_data(self, eta_plus, n_B, q, rng):
        n_A, n_B = self.sizes(n_B, q)
        n = n_A + n_B
        X = np.empty((n, 3))
        X[:, 0] = 1.0
        X[:n_A, 1] = 1.0
        X[n_A:, 1] = 0.0
        X[:, 2] = rng.normal(self.x2_mean, self.x2_sd, n)
        p = special.expit(X @ np.asarray(eta_plus[:3], float))
        y = (rng.random(n) < p).astype(float)
        return Dataset(y, X, n_A, n_B)

    def _log_post(self, beta, Y, X, mu0, prec):
        eta = np.einsum("mni,mi->mn", X, beta)
        # log-likelihood y*eta - log(1+e^eta), written stably
        ll = np.sum(Y * eta - np.logaddexp(0.0, eta), axis=1)
        d = beta - mu0
        return ll - 0.5 * np.sum(prec * d * d, axis=1)

    def laplace(self, Y, X):
        """Posterior mode, covariance and convergence flag for each dataset."""
        mu0 = np.asarray(self.prior_mean, float)
        prec = 1.0 / np.asarray(self.prior_sd, float) ** 2
        m = Y.shape[0]
        beta = np.tile(mu0, (m, 1))
        done = np.zeros(m, bool)
        H = None
        for _ in range(self.max_iter):
            eta = np.einsum("mni,mi->mn", X, beta)
            p = special.expit(eta)
            grad = np.einsum("mni,mn->mi", X, Y - p) - prec * (beta - mu0)
            W = p * (1 - p)
            H = np.einsum("mni,mn,mnj->mij", X, W, X) + np.diag(prec)
            done = np.max(np.abs(grad), axis=1) < self.grad_tol
            if done.all():
                break
            act = ~done
            step = np.linalg.solve(H[act], grad[act][..., None])[..., 0]
            cur = beta[act]
            Ya, Xa = Y[act], X[act]
            f0 = self._log_post(cur, Ya, Xa, mu0, prec)
            t = np.ones(len(cur))
            cand = cur + step
            for _ in range(30):
                worse = self._log_post(cand, Ya, Xa, mu0, prec) < f0 - 1e-12
                if not worse.any():
                    break
                t[worse] *= 0.5
                cand[worse] = cur[worse] + t[worse, None] * step[worse]
            beta[act] = cand
        else:
            eta = np.einsum("mni,mi->mn", X, beta)
            p = special.expit(eta)
            grad = np.einsum("mni,mn->mi", X, Y - p) - prec * (beta - mu0)
            W = p * (1 - p)
            H = np.einsum("mni,mn,mnj->mij", X, W, X) + np.diag(prec)
            done = np.max(np.abs(grad), axis=1) < self.grad_tol
        cov = np.linalg.inv(H)
        return beta, cov, done

    def posterior_batch(self, Y, X, hyp):
        mode, cov, ok = self.laplace(Y, X)
        lo, hi = self.working_interval(hyp)
        sd = np.sqrt(cov[:, 1, 1])
        probs = _interval_prob(special.ndtr, mode[:, 1], sd, lo, hi)
        ok = ok & np.isfinite(probs)
        return np.where(ok, probs, np.nan), ok

    def fisher_info(self, eta_plus, q=1.0, nodes: int = 80) -> float:
        """Expected information for ``b1`` per unit of ``n_B``.

        Expectation over the normal covariate by Gauss-Hermite quadrature.
        """
        b = np.asarray(eta_plus[:3], float)
        z, w = np.polynomial.hermite_e.hermegauss(nodes)
        w = w / w.sum()
        x2 = self.x2_mean + self.x2_sd * z
        info = np.zeros((3, 3))
        for x1, weight in ((1.0, q), (0.0, 1.0)):
            p = special.expit(b[0] + b[1] * x1 + b[2] * x2)
            v = w * p * (1 - p)
            cols = np.stack([np.ones_like(x2), np.full_like(x2, x1), x2])
            info += weight * (cols * v) @ cols.T
        return 1.0 / np.linalg.inv(info)[1, 1]


MODELS = {
    NormalMeanModel.name: NormalMeanModel,
    GaussianRegressionModel.name: GaussianRegressionModel,
    LogisticRegressionModel.name: LogisticRegressionModel,
}


@dataclass(frozen=True)
class ExampleSetup:
    model: Model
    hypothesis: IntervalHypothesis
    psi0: DataGenProcess
    psi1: DataGenProcess
    alpha: float
    beta: float
    q: float
    m: int
    subgroups: int = 1
    notes: dict = field(default_factory=dict)


def semaglutide_weight() -> ExampleSetup:
    """Percentage weight change regression (Example 2)."""
    return ExampleSetup(
        model=GaussianRegressionModel(),
        hypothesis=IntervalHypothesis(5.0, math.inf),
        psi0=DataGenProcess(0, (-25.75, 5.0, 0.25)),
        psi1=DataGenProcess(1, (-25.75, 10.5, 0.25), uniform=((1, 9.0, 12.0),)),
        alpha=0.05,
        beta=0.2,
        q=2.0,
        m=10_000,
        subgroups=10,
    )


def semaglutide_sae() -> ExampleSetup:
    """Serious adverse event logistic regression (Example 1)."""
    return ExampleSetup(
        model=LogisticRegressionModel(),
        hypothesis=IntervalHypothesis(-math.inf, 2.0),
        psi0=DataGenProcess(0, (-2.71, math.log(2.0), 0.25)),
        psi1=DataGenProcess(1, (-2.71, math.log(1.25), 0.25)),
        alpha=0.4,
        beta=0.25,
        q=2.0,
        m=100_000,
        subgroups=1,
    )
