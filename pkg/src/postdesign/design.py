"""Optimal sample size and critical value from two simulated sample sizes.

The optimiser simulates sampling distributions of posterior probabilities at
two anchor sizes only.  Between and beyond the anchors each rank of the
sorted logits is modelled as a straight line in ``n``; the smallest ``n`` at
which the predicted power threshold clears the predicted type I threshold is
found by bisection, and the critical value is read off the predicted H0
distribution there.

Phase 1 has a single anchor ``n0`` and takes its slopes from the large-sample
limit in :mod:`proxy`.  Phase 2 joins equal ranks at ``n0`` and ``n1``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .config import DesignConfig
from .core import InfeasibleError, RngStream, inv_logit, power_rank, std_normal_quantile, type1_rank, xi
from .models import DataGenProcess, IntervalHypothesis, Model
from .proxy import limiting_slope
from .sampdist import OCEstimate, SampDist, estimate, feasible, oc_estimate, thresholds

log = logging.getLogger(__name__)

# lane phases; every simulation site owns one so streams never overlap
PHASE_N0 = 0
PHASE_N1 = 1
PHASE_N2 = 2
PHASE_DIRECT = 3
PHASE_BOOT = 4

CAP_FACTOR = 2**16
INFEASIBLE_FLAG_FRACTION = Fraction(1, 100)


@dataclass(frozen=True)
class RankLines:
    """One line per rank (or per repetition in phase 1) of logits versus ``n``.

    ``logits_a``/``probs_a`` are the anchor values at ``n_a`` in line order.
    Matched lines also keep the probabilities at the second anchor ``n_b``
    so that predictions there reproduce the simulation exactly.
    """

    j: int
    n_a: float
    logits_a: np.ndarray
    probs_a: np.ndarray
    slopes: np.ndarray
    n_b: float | None = None
    probs_b: np.ndarray | None = None
    groups: np.ndarray | None = None

    @property
    def m(self) -> int:
        return int(self.logits_a.size)

    def logits_at(self, n: float) -> np.ndarray:
        return self.logits_a + self.slopes * (n - self.n_a)

    def probs_at(self, n: float) -> np.ndarray:
        if n == self.n_a:
            return self.probs_a
        if self.n_b is not None and n == self.n_b:
            return self.probs_b
        return inv_logit(self.logits_at(n))

    def order_stat(self, k: int, n: float) -> float:
        """``k``-th smallest predicted probability at ``n``."""
        if n == self.n_a:
            return xi(k, self.probs_a)
        if self.n_b is not None and n == self.n_b:
            return xi(k, self.probs_b)
        # inv_logit is monotone, so it commutes with order statistics
        return inv_logit(xi(k, self.logits_at(n)))


def predict_dist(lines: RankLines, n: float) -> np.ndarray:
    """Predicted logits at ``n``, one per line (not sorted)."""
    if n <= 0:
        raise ValueError("n must be positive")
    return lines.logits_at(n)


def initial_n0(
    model: Model,
    hyp: IntervalHypothesis,
    psi1: DataGenProcess,
    alpha: float,
    beta: float,
    q: float = 1.0,
    gamma: float | None = None,
) -> int:
    """Large-sample size giving power ``1 - beta`` at critical value ``1 - alpha``.

    ``ceil(((z_{1-alpha} + z_{1-beta}) / a)^2)`` where ``a`` is the
    standardised distance from the median estimand under ``psi1`` to the
    nearest hypothesis endpoint.  ``gamma`` replaces ``1 - alpha`` when the
    critical value is fixed.
    """
    eta = psi1.median()
    theta = model.working(model.theta(eta))
    lo, hi = model.working_interval(hyp)
    if not lo < theta < hi:
        raise InfeasibleError(f"median estimand {model.theta(eta):g} does not lie inside H1")
    info = model.fisher_info(eta, q)
    a = min((abs(d - theta) for d in (lo, hi) if math.isfinite(d)), default=math.inf) * math.sqrt(info)
    if a == 0:
        raise InfeasibleError("median estimand sits on a hypothesis boundary")
    if math.isinf(a):
        raise InfeasibleError("hypothesis has no finite endpoint")
    level = 1 - alpha if gamma is None else gamma
    z = std_normal_quantile(level) + std_normal_quantile(1 - beta)
    return max(1, math.ceil((z / a) ** 2))


def phase1_lines(sd: SampDist, hyp: IntervalHypothesis, model: Model, q: float = 1.0, psi: DataGenProcess | None = None) -> RankLines:
    """A line through every observed logit with the large-sample slope.

    Slopes use each repetition's own estimand.  ``psi`` supplies the nuisance
    components for Fisher information when that depends on them.
    """
    lo, hi = model.working_interval(hyp)
    whyp = IntervalHypothesis(lo, hi)
    base = np.asarray(psi.median() if psi is not None else np.zeros(model.n_params), float)
    uniq, inv = np.unique(sd.thetas, return_inverse=True)
    info = np.array([model.fisher_info(model.with_theta(base, t), q) for t in uniq])
    slopes = np.atleast_1d(limiting_slope(model.working(uniq), whyp, info))[inv]
    return RankLines(sd.j, sd.n, sd.logits.copy(), sd.probs.copy(), slopes)


def subgroup_order(sd: SampDist, subgroups: int) -> tuple[np.ndarray, np.ndarray]:
    """Row order sorting probabilities within estimand subgroups.

    Rows are split by the rank of their estimand into ``subgroups`` blocks of
    ``m // subgroups`` (the last block takes the remainder).  Returns the row
    order and the block label of each position.
    """
    m = sd.m
    # ties only arise between duplicated rows, so sort stability is irrelevant
    if subgroups == 1:
        return np.argsort(sd.probs), np.zeros(m, dtype=int)
    if not 1 <= subgroups <= m:
        raise ValueError(f"cannot split {m} repetitions into {subgroups} subgroups")
    label = np.empty(m, dtype=int)
    label[np.argsort(sd.thetas)] = np.minimum(np.arange(m) // (m // subgroups), subgroups - 1)
    by_prob = np.argsort(sd.probs)
    order = by_prob[np.argsort(label[by_prob], kind="stable")]
    return order, label[order]


def matched_lines(sd_a: SampDist, sd_b: SampDist, subgroups: int = 1) -> RankLines:
    """Join equal ranks of the two anchors (within subgroups) by lines."""
    if sd_a.m != sd_b.m:
        raise ValueError("anchors must have the same number of repetitions")
    if sd_a.j != sd_b.j:
        raise ValueError("anchors must come from the same hypothesis")
    if sd_a.n == sd_b.n:
        raise ValueError(f"anchor sizes coincide (n={sd_a.n}); lines need two distinct sizes")
    oa, groups = subgroup_order(sd_a, subgroups)
    ob, _ = subgroup_order(sd_b, subgroups)
    la, lb = sd_a.logits[oa], sd_b.logits[ob]
    slopes = (lb - la) / (sd_b.n - sd_a.n)
    return RankLines(sd_a.j, sd_a.n, la, sd_a.probs[oa], slopes, sd_b.n, sd_b.probs[ob], groups)


def feasibility_predicate(lines1: RankLines, lines0: RankLines, alpha: float, beta: float, fixed_gamma: float | None = None):
    """``P(n)``: some critical value meets both criteria at ``n``.

    With ``fixed_gamma`` only the power criterion at that value is checked.
    """
    k1 = power_rank(lines1.m, beta)
    k0 = type1_rank(lines0.m, alpha)

    def P(n: float) -> bool:
        p1 = lines1.order_stat(k1, n)
        if fixed_gamma is not None:
            return p1 >= fixed_gamma
        return p1 >= np.nextafter(lines0.order_stat(k0, n), math.inf)

    return P


@dataclass(frozen=True)
class SearchBounds:
    lo: float
    start: float
    cap: float


@dataclass(frozen=True)
class SearchResult:
    n: float
    probes: tuple[tuple[float, bool], ...]
    repaired: bool = False
    nonmonotone: bool = False


def _search(P, bounds: SearchBounds, resolution: int = 1, scan: int = 8) -> SearchResult:
    """Smallest grid point ``k / resolution`` in the bounds with ``P`` true."""
    cache: dict[int, bool] = {}
    probes: list[tuple[float, bool]] = []

    def at(k: int):
        return k if resolution == 1 else k / resolution

    def test(k: int) -> bool:
        if k not in cache:
            cache[k] = bool(P(at(k)))
            probes.append((at(k), cache[k]))
        return cache[k]

    k_lo = math.ceil(bounds.lo * resolution)
    k_cap = math.floor(bounds.cap * resolution)
    if k_cap < k_lo:
        raise ValueError("search cap lies below the lower bound")
    k = min(max(round(bounds.start * resolution), k_lo), k_cap)

    # gallop from the start point to bracket the boundary
    downward = False
    f = None
    if test(k):
        hi = k
    else:
        hi, f, step = None, k, 1
        while hi is None and f < k_cap:
            cand = min(f + step, k_cap)
            if test(cand):
                hi = cand
            else:
                f, step = cand, step * 2
        if hi is None:
            # nothing at or above the start; the predicate may still hold below it
            downward, step, cand = True, 1, k
            while hi is None and cand > k_lo:
                cand = max(k - step, k_lo)
                if test(cand):
                    hi = cand
                step *= 2
            if hi is None:
                raise InfeasibleError(
                    f"criteria not met at any size from {at(k_lo)} up to the cap n={at(k_cap)}",
                    largest_probe=at(k_cap),
                )
            f = None
    if f is None:
        step = 1
        while True:
            cand = max(hi - step, k_lo)
            if not test(cand):
                f = cand
                break
            hi = cand
            if cand == k_lo:
                return SearchResult(at(k_lo), tuple(probes), downward, downward)
            step *= 2

    while hi - f > 1:
        mid = (hi + f) // 2
        if test(mid):
            hi = mid
        else:
            f = mid

    # lines may cross, so check a window below the answer
    repaired = nonmonotone = downward
    below = [c for c in range(max(k_lo, hi - scan), hi - 1) if test(c)]
    if below:
        repaired = True
        hi = below[0]
        while hi - 1 >= k_lo and test(hi - 1):
            hi -= 1
            nonmonotone = True
    if any(not test(c) for c in range(hi + 1, min(hi + scan, k_cap) + 1)):
        nonmonotone = True
    if repaired or nonmonotone:
        log.info("search predicate not monotone near n=%g", hi / resolution)
    return SearchResult(at(hi), tuple(probes), repaired, nonmonotone)


def search_smallest_n(
    lines1: RankLines,
    lines0: RankLines,
    alpha: float,
    beta: float,
    bounds: SearchBounds,
    resolution: int = 1,
    scan: int = 8,
    fixed_gamma: float | None = None,
) -> SearchResult:
    """Smallest ``n`` (a multiple of ``1/resolution``) meeting both criteria."""
    P = feasibility_predicate(lines1, lines0, alpha, beta, fixed_gamma)
    return _search(P, bounds, resolution, scan)


def recommend_gamma(lines0: RankLines, n: float, alpha: float, fixed_gamma: float | None = None) -> tuple[float, bool]:
    """Smallest critical value meeting the type I criterion at ``n``.

    Returns ``(gamma, clamped)``; ``gamma`` is forced into ``[0.5, 1)``.
    """
    if fixed_gamma is not None:
        return float(fixed_gamma), False
    g = float(np.nextafter(lines0.order_stat(type1_rank(lines0.m, alpha), n), math.inf))
    if g < 0.5:
        return 0.5, True
    if g >= 1.0:
        return float(np.nextafter(1.0, 0.0)), True
    return g, False


@dataclass
class OptimizerTrace:
    """Everything the optimiser simulated and decided.

    ``sd1_a``/``sd0_a`` are the H1/H0 sampling distributions at the first
    anchor ``n_a`` and ``sd1_b``/``sd0_b`` those at the second anchor
    ``n_b``.  Lines are ``None`` when stale (after :func:`augment_m`).
    """

    config: DesignConfig
    n0: int
    n1: int
    n2: float
    n_a: int
    n_b: int
    sd1_a: SampDist
    sd0_a: SampDist
    sd1_b: SampDist
    sd0_b: SampDist
    lines1: RankLines | None = None
    lines0: RankLines | None = None
    phase1: tuple[RankLines, RankLines] | None = None
    probes: list[dict] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    evaluations: int = 0
    resimulated: bool = False

    @property
    def m(self) -> int:
        return self.sd1_a.m

    @property
    def anchors(self) -> tuple[SampDist, SampDist, SampDist, SampDist]:
        return self.sd1_a, self.sd0_a, self.sd1_b, self.sd0_b

    @property
    def bounds_lo(self) -> int:
        return self.config.model.min_n

    @property
    def cap(self) -> int:
        return CAP_FACTOR * self.n0

    def summary(self) -> dict:
        return {
            "n0": self.n0,
            "n1": self.n1,
            "n2": self.n2,
            "anchors": [self.n_a, self.n_b],
            "m": self.m,
            "resimulated": self.resimulated,
            "evaluations": self.evaluations,
            "flags": list(self.flags),
            "probes": list(self.probes),
        }


@dataclass(frozen=True)
class DesignRecommendation:
    n: float
    gamma: float
    power: float
    type1: float
    flags: tuple[str, ...]
    trace: OptimizerTrace = field(repr=False, compare=False)

    @property
    def evaluations(self) -> int:
        return self.trace.evaluations

    def to_dict(self) -> dict:
        n = int(self.n) if float(self.n).is_integer() else float(self.n)
        return {
            "n_B": n,
            "gamma": self.gamma,
            "predicted_power": self.power,
            "predicted_type1": self.type1,
            "flags": list(self.flags),
        }


def _finish(
    sd1_a, sd0_a, sd1_b, sd0_b, cfg: DesignConfig, start: float, lo: float, cap: float
) -> tuple[RankLines, RankLines, SearchResult, float, bool]:
    """Matched lines, searched size and critical value for four anchors."""
    opt = cfg.optimizer
    s1, s0 = cfg.subgroups
    lines1 = matched_lines(sd1_a, sd1_b, s1)
    lines0 = matched_lines(sd0_a, sd0_b, s0)
    res = search_smallest_n(
        lines1,
        lines0,
        cfg.alpha,
        cfg.beta,
        SearchBounds(lo, start, cap),
        100 if opt.fractional_n else 1,
        opt.scan,
        opt.fixed_gamma,
    )
    gamma, clamped = recommend_gamma(lines0, res.n, cfg.alpha, opt.fixed_gamma)
    return lines1, lines0, res, gamma, clamped


def _log_probes(trace_probes: list, phase: str, res: SearchResult) -> None:
    trace_probes.extend({"phase": phase, "n": n, "feasible": ok} for n, ok in res.probes)


def _recommendation(trace: OptimizerTrace, res: SearchResult, gamma: float, clamped: bool) -> DesignRecommendation:
    flags = [f for f in trace.flags]
    if res.repaired:
        flags.append("search_repaired")
    if res.nonmonotone:
        flags.append("nonmonotone_predicate")
    if clamped:
        flags.append("gamma_clamped")
    trace.flags = flags
    power = float(np.mean(trace.lines1.probs_at(res.n) >= gamma))
    type1 = float(np.mean(trace.lines0.probs_at(res.n) >= gamma))
    return DesignRecommendation(res.n, gamma, power, type1, tuple(flags), trace)


def optimize(cfg: DesignConfig, threads: int = 1, progress=None) -> DesignRecommendation:
    """Two-anchor optimisation of ``(n_B, gamma)``.

    ``progress`` is an optional callable receiving short status strings.
    """
    say = progress or (lambda msg: None)
    model, hyp, opt = cfg.model, cfg.hypothesis, cfg.optimizer
    lo = model.min_n
    n0 = max(initial_n0(model, hyp, cfg.psi1, cfg.alpha, cfg.beta, cfg.q, opt.fixed_gamma), lo)
    cap = CAP_FACTOR * n0
    flags: list[str] = []
    probes: list[dict] = []
    evaluations = 0

    def sim(psi, n, phase):
        nonlocal evaluations
        evaluations += cfg.m
        return estimate(model, hyp, psi, n, cfg.q, cfg.m, cfg.seed, phase, threads=threads, eps=opt.eps)

    say(f"simulating at n0={n0}")
    sd1_0, sd0_0 = sim(cfg.psi1, n0, PHASE_N0), sim(cfg.psi0, n0, PHASE_N0)
    l1 = phase1_lines(sd1_0, hyp, model, cfg.q, cfg.psi1)
    l0 = phase1_lines(sd0_0, hyp, model, cfg.q, cfg.psi0)
    partial = dict(config=cfg, n0=n0, probes=probes, flags=flags)
    try:
        res1 = search_smallest_n(l1, l0, cfg.alpha, cfg.beta, SearchBounds(lo, n0, cap), 1, opt.scan, opt.fixed_gamma)
    except InfeasibleError as exc:
        exc.trace = partial
        raise
    _log_probes(probes, "phase1", res1)
    n1 = int(res1.n)
    gap = max(2, math.ceil(0.1 * n0))
    if n1 == n0:
        n1 = n0 + gap
        flags.append("anchor_perturbed")

    say(f"simulating at n1={n1}")
    sd1_1, sd0_1 = sim(cfg.psi1, n1, PHASE_N1), sim(cfg.psi0, n1, PHASE_N1)
    try:
        lines1, lines0, res2, gamma, clamped = _finish(sd1_0, sd0_0, sd1_1, sd0_1, cfg, n1, lo, cap)
    except InfeasibleError as exc:
        if abs(n1 - n0) >= gap:
            exc.trace = dict(partial, n1=n1)
            raise
        # close anchors give noise-dominated slopes; retry once with a wider gap
        n1 = n0 + gap
        flags.append("anchor_widened")
        say(f"phase 2 infeasible, simulating at n1={n1}")
        sd1_1, sd0_1 = sim(cfg.psi1, n1, PHASE_N1), sim(cfg.psi0, n1, PHASE_N1)
        try:
            lines1, lines0, res2, gamma, clamped = _finish(sd1_0, sd0_0, sd1_1, sd0_1, cfg, n1, lo, cap)
        except InfeasibleError as exc2:
            exc2.trace = dict(partial, n1=n1)
            raise
    _log_probes(probes, "phase2", res2)
    trace = OptimizerTrace(
        cfg, n0, n1, res2.n, n0, n1, sd1_0, sd0_0, sd1_1, sd0_1, lines1, lines0, (l1, l0), probes, flags
    )

    if opt.resimulate and abs(res2.n - n1) / n1 > opt.resim_threshold:
        n2s = math.ceil(res2.n)
        if n2s != n1:
            say(f"re-simulating at n2={n2s}")
            sd1_2, sd0_2 = sim(cfg.psi1, n2s, PHASE_N2), sim(cfg.psi0, n2s, PHASE_N2)
            lines1, lines0, res2, gamma, clamped = _finish(sd1_1, sd0_1, sd1_2, sd0_2, cfg, n2s, lo, cap)
            _log_probes(probes, "resim", res2)
            trace.n_a, trace.n_b = n1, n2s
            trace.sd1_a, trace.sd0_a, trace.sd1_b, trace.sd0_b = sd1_1, sd0_1, sd1_2, sd0_2
            trace.lines1, trace.lines0 = lines1, lines0
            trace.n2 = res2.n
            trace.resimulated = True

    trace.evaluations = evaluations
    return _recommendation(trace, res2, gamma, clamped)


def refit(trace: OptimizerTrace) -> DesignRecommendation:
    """Rebuild matched lines from the trace's anchors and re-run the search."""
    lines1, lines0, res, gamma, clamped = _finish(*trace.anchors, trace.config, trace.n2, trace.bounds_lo, trace.cap)
    kept = [f for f in trace.flags if f in ("anchor_perturbed", "anchor_widened")]
    new = replace(trace, lines1=lines1, lines0=lines0, n2=res.n, flags=kept)
    _log_probes(new.probes, "refit", res)
    return _recommendation(new, res, gamma, clamped)


@dataclass(frozen=True)
class BootstrapResult:
    n_values: np.ndarray
    gamma_values: np.ndarray
    n_ci: tuple[float, float]
    gamma_ci: tuple[float, float]
    level: float
    M: int
    m_star: int
    infeasible: int
    flagged: bool

    def rows(self):
        for b, (n, g) in enumerate(zip(self.n_values, self.gamma_values)):
            yield b + 1, n, g


def percentile_ci(values, level: float) -> tuple[float, float]:
    """Order statistics at ranks ``floor(M(1-level)/2)`` and ``ceil(M(1+level)/2)``.

    Ranks are 1-based and clipped into ``1..M``; NaNs are dropped first.
    """
    v = np.sort(np.asarray(values, float))
    v = v[~np.isnan(v)]
    M = v.size
    if M == 0:
        return math.nan, math.nan
    lev = Fraction(repr(level))
    lo = min(max(math.floor(M * (1 - lev) / 2), 1), M)
    hi = min(max(math.ceil(M * (1 + lev) / 2), 1), M)
    return float(v[lo - 1]), float(v[hi - 1])


def _boot_chunk(args):
    trace, seed, m_star, bs = args
    cfg = trace.config
    out = []
    rng = None
    for b in bs:
        rng = RngStream(seed, 0, int(b), PHASE_BOOT).generator(rng)
        sds = [sd.take(rng.integers(0, sd.m, m_star)) for sd in trace.anchors]
        try:
            _, _, res, gamma, _ = _finish(*sds, cfg, trace.n2, trace.bounds_lo, trace.cap)
            out.append((res.n, gamma))
        except InfeasibleError:
            out.append((math.nan, math.nan))
    return out


def bootstrap_cis(
    trace: OptimizerTrace,
    M: int,
    m_star: int | None = None,
    level: float = 0.95,
    seed: int | None = None,
    threads: int = 1,
) -> BootstrapResult:
    """Percentile bootstrap intervals for ``(n, gamma)``.

    Each resample draws ``m_star`` rows with replacement from each of the four
    anchor distributions (estimands travel with their probabilities so
    subgroups are rebuilt) and repeats the phase-2 search.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    m_star = trace.m if m_star is None else int(m_star)
    if m_star < 1:
        raise ValueError("m_star must be at least 1")
    power_rank(m_star, trace.config.beta)
    seed = trace.config.seed if seed is None else seed
    idx = np.arange(M)
    chunks = [idx[i::threads] for i in range(threads)] if threads > 1 else [idx]
    jobs = [(trace, seed, m_star, c) for c in chunks]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(_boot_chunk, jobs))
    else:
        parts = [_boot_chunk(j) for j in jobs]
    n_vals = np.empty(M)
    g_vals = np.empty(M)
    for c, part in zip(chunks, parts):
        arr = np.asarray(part, float).reshape(-1, 2)
        n_vals[c], g_vals[c] = arr[:, 0], arr[:, 1]
    bad = int(np.isnan(n_vals).sum())
    return BootstrapResult(
        n_vals,
        g_vals,
        percentile_ci(n_vals, level),
        percentile_ci(g_vals, level),
        level,
        M,
        m_star,
        bad,
        Fraction(bad, M) > INFEASIBLE_FLAG_FRACTION,
    )


def augment_m(trace: OptimizerTrace, additional_m: int, threads: int = 1) -> OptimizerTrace:
    """Extend all four anchor distributions with fresh repetitions.

    New repetitions continue the lanes of the originals, so the result equals
    a run made with the larger ``m`` from the start.  Lines become stale.
    """
    if additional_m < 0:
        raise ValueError("additional_m must be nonnegative")
    if additional_m == 0:
        return trace
    cfg = trace.config
    ext = []
    for sd, psi in zip(trace.anchors, (cfg.psi1, cfg.psi0, cfg.psi1, cfg.psi0)):
        more = estimate(
            cfg.model, cfg.hypothesis, psi, int(sd.n), cfg.q, additional_m, sd.seed, sd.phase,
            r0=sd.r0 + sd.m, threads=threads, eps=cfg.optimizer.eps,
        )
        ext.append(sd.concat(more))
    return replace(
        trace,
        config=cfg.replace(m=cfg.m + additional_m),
        sd1_a=ext[0], sd0_a=ext[1], sd1_b=ext[2], sd0_b=ext[3],
        lines1=None, lines0=None,
        probes=list(trace.probes),
        flags=list(trace.flags),
        evaluations=trace.evaluations + 4 * additional_m,
    )


def direct_oc(cfg: DesignConfig, n: int, gamma: float, m: int | None = None, threads: int = 1, phase: int = PHASE_DIRECT) -> OCEstimate:
    """Operating characteristics at ``(n, gamma)`` by direct simulation."""
    m = cfg.m if m is None else m
    sds = [
        estimate(cfg.model, cfg.hypothesis, psi, n, cfg.q, m, cfg.seed, phase, threads=threads, eps=cfg.optimizer.eps)
        for psi in (cfg.psi1, cfg.psi0)
    ]
    return oc_estimate(sds[0], sds[1], gamma, cfg.alpha, cfg.beta)


@dataclass(frozen=True)
class DirectSearchResult:
    n: int
    gamma: float
    evaluations: int
    probed: tuple[int, ...]


def direct_search(cfg: DesignConfig, threads: int = 1, hi: int | None = None) -> DirectSearchResult:
    """Baseline: bisection over ``n`` with a fresh simulation at every probe.

    The bracket is ``[min_n, hi]`` with ``hi`` defaulting to four times the
    large-sample guess; ``hi`` doubles until it is feasible.  Each probe
    simulates both hypotheses and checks whether any critical value meets
    both criteria.
    """
    model, opt = cfg.model, cfg.optimizer
    lo = model.min_n
    if hi is None:
        hi = 4 * max(initial_n0(model, cfg.hypothesis, cfg.psi1, cfg.alpha, cfg.beta, cfg.q, opt.fixed_gamma), lo)
    cache: dict[int, tuple[bool, float]] = {}

    def P(n: int) -> bool:
        if n not in cache:
            sd1, sd0 = (
                estimate(model, cfg.hypothesis, psi, n, cfg.q, cfg.m, cfg.seed, PHASE_DIRECT, threads=threads, eps=opt.eps)
                for psi in (cfg.psi1, cfg.psi0)
            )
            xi1 = thresholds(sd1.probs, 1, cfg.alpha, cfg.beta)
            if opt.fixed_gamma is not None:
                cache[n] = (xi1 >= opt.fixed_gamma, opt.fixed_gamma)
            else:
                xi0 = thresholds(sd0.probs, 0, cfg.alpha, cfg.beta)
                cache[n] = (xi0 <= xi1, xi0)
        return cache[n][0]

    while not P(hi):
        if hi >= CAP_FACTOR * lo:
            raise InfeasibleError(f"criteria not met up to n={hi}", largest_probe=hi)
        lo, hi = hi + 1, 2 * hi
    false_at = lo - 1
    while hi - false_at > 1:
        mid = (hi + false_at) // 2
        if P(mid):
            hi = mid
        else:
            false_at = mid
    return DirectSearchResult(hi, float(cache[hi][1]), 2 * cfg.m * len(cache), tuple(sorted(cache)))


def exhaustive_search(cfg: DesignConfig, n_values, threads: int = 1) -> DirectSearchResult:
    """Oracle: simulate at every ``n`` in ``n_values`` and take the smallest feasible one.

    All sizes share the same lanes (common random numbers), so feasibility
    varies smoothly in ``n``.
    """
    opt = cfg.optimizer
    for n in sorted(n_values):
        sd1, sd0 = (
            estimate(cfg.model, cfg.hypothesis, psi, n, cfg.q, cfg.m, cfg.seed, PHASE_DIRECT, threads=threads, eps=opt.eps)
            for psi in (cfg.psi1, cfg.psi0)
        )
        xi1 = thresholds(sd1.probs, 1, cfg.alpha, cfg.beta)
        if opt.fixed_gamma is not None:
            ok, gamma = xi1 >= opt.fixed_gamma, opt.fixed_gamma
        else:
            gamma = thresholds(sd0.probs, 0, cfg.alpha, cfg.beta)
            ok = gamma <= xi1
        if ok:
            probed = tuple(v for v in sorted(n_values) if v <= n)
            return DirectSearchResult(int(n), float(gamma), 2 * cfg.m * len(probed), probed)
    raise InfeasibleError(f"no feasible size in {min(n_values)}..{max(n_values)}")
