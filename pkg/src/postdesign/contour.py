"""Power and type I error surfaces over an (n, gamma) lattice.

Surfaces are evaluated from the optimiser's matched rank lines, so building
a grid needs no further simulation.  Level sets are traced with marching
squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .design import DesignRecommendation, OptimizerTrace

POWER = "power"
TYPE1 = "type1"


@dataclass(frozen=True)
class ContourGrid:
    n: np.ndarray
    gamma: np.ndarray
    power: np.ndarray
    type1: np.ndarray
    power_counts: np.ndarray
    type1_counts: np.ndarray
    m: int
    alpha: float
    beta: float
    provenance: dict = field(default_factory=dict)

    def surface(self, tag: str) -> np.ndarray:
        if tag == POWER:
            return self.power
        if tag == TYPE1:
            return self.type1
        raise ValueError(f"unknown surface {tag!r}")

    def feasible_mask(self) -> np.ndarray:
        """Grid points meeting both criteria, decided on integer counts."""
        need1 = self.m - math.floor(self.m * _frac(self.beta))
        max0 = math.floor(self.m * _frac(self.alpha))
        return (self.power_counts >= need1) & (self.type1_counts <= max0)

    def rows(self):
        for i, n in enumerate(self.n):
            for k, g in enumerate(self.gamma):
                yield n, g, self.power[i, k], self.type1[i, k]


def _frac(x: float) -> Fraction:
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class LevelPolyline:
    surface: str
    level: float
    vertices: np.ndarray

    def to_dict(self) -> dict:
        return {"surface": self.surface, "level": self.level, "vertices": self.vertices.tolist()}


def default_window(n2: float, gamma: float, lo: int, steps: int = 200):
    n_values = np.arange(max(lo, math.ceil(0.6 * n2)), math.ceil(1.5 * n2) + 1)
    g_lo, g_hi = max(0.5, gamma - 0.15), min(0.999, gamma + 0.04)
    return n_values, np.linspace(g_lo, g_hi, steps)


def build_grid(
    rec: DesignRecommendation | OptimizerTrace,
    n_range=None,
    gamma_range=None,
    gamma_steps: int = 200,
) -> ContourGrid:
    """Evaluate both surfaces on integer ``n`` in ``n_range`` and ``gamma_steps`` values of gamma.

    Without ranges the window spans ``[0.6 n2, 1.5 n2]`` and
    ``[gamma - 0.15, gamma + 0.04]`` (clipped to ``[0.5, 0.999]``).  The
    recommended critical value is always added to the gamma axis when it
    falls inside the range.
    """
    trace = rec.trace if isinstance(rec, DesignRecommendation) else rec
    if trace.lines1 is None or trace.lines0 is None:
        raise ValueError("trace lines are stale; refit the trace first")
    gamma_rec = rec.gamma if isinstance(rec, DesignRecommendation) else None
    lo = trace.bounds_lo
    n_def, g_def = default_window(trace.n2, gamma_rec if gamma_rec is not None else 0.95, lo, gamma_steps)
    if n_range is None:
        n_values = n_def
    else:
        a, b = n_range
        if a < lo:
            raise ValueError(f"n range starts at {a}, below the model minimum {lo}")
        n_values = np.arange(math.ceil(a), math.floor(b) + 1)
    if n_values.size == 0:
        raise ValueError("empty n range")
    g_values = g_def if gamma_range is None else np.linspace(gamma_range[0], gamma_range[1], gamma_steps)
    if not (g_values[0] >= 0.5 and g_values[-1] < 1):
        raise ValueError("gamma range must lie in [0.5, 1)")
    if gamma_rec is not None and g_values[0] <= gamma_rec <= g_values[-1]:
        g_values = np.union1d(g_values, [gamma_rec])

    m1, m0 = trace.lines1.m, trace.lines0.m
    c1 = np.empty((n_values.size, g_values.size), dtype=np.int64)
    c0 = np.empty_like(c1)
    for i, n in enumerate(n_values):
        for lines, out in ((trace.lines1, c1), (trace.lines0, c0)):
            p = np.sort(lines.probs_at(float(n)))
            out[i] = p.size - np.searchsorted(p, g_values, side="left")
    cfg = trace.config
    return ContourGrid(
        n_values.astype(float),
        g_values,
        c1 / m1,
        c0 / m0,
        c1,
        c0,
        m1,
        cfg.alpha,
        cfg.beta,
        {"anchors": [trace.n_a, trace.n_b], "m": m1, "seed": cfg.seed, "n2": trace.n2, "gamma": gamma_rec},
    )


# marching squares -------------------------------------------------------

# corners in cell order: (i, k), (i+1, k), (i+1, k+1), (i, k+1)
# edges: 0 bottom (c0-c1), 1 right (c1-c2), 2 top (c3-c2), 3 left (c0-c3)
_EDGE_CORNERS = ((0, 1), (1, 2), (3, 2), (0, 3))
# the two edges adjacent to each corner
_CORNER_EDGES = ((0, 3), (0, 1), (1, 2), (2, 3))


def _edge_key(i: int, k: int, e: int):
    if e == 0:
        return ("h", i, k)
    if e == 2:
        return ("h", i, k + 1)
    if e == 1:
        return ("v", i + 1, k)
    return ("v", i, k)


def extract_level(grid: ContourGrid, tag: str, level: float) -> list[LevelPolyline]:
    """Level set of one surface as stitched polylines in (n, gamma) coordinates.

    Corners at or above the level count as inside.  Saddle cells are split
    according to the average of their four corners.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    Z = grid.surface(tag)
    xs, ys = grid.n, grid.gamma
    points: dict = {}
    links: dict = {}

    def point(i, k, e, vals):
        key = _edge_key(i, k, e)
        if key not in points:
            a, b = _EDGE_CORNERS[e]
            va, vb = vals[a], vals[b]
            t = (level - va) / (vb - va)
            ca, cb = _corner_xy(i, k, a), _corner_xy(i, k, b)
            pa = (xs[ca[0]], ys[ca[1]])
            pb = (xs[cb[0]], ys[cb[1]])
            points[key] = (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))
        return key

    def link(u, v):
        links.setdefault(u, []).append(v)
        links.setdefault(v, []).append(u)

    for i in range(len(xs) - 1):
        for k in range(len(ys) - 1):
            vals = (Z[i, k], Z[i + 1, k], Z[i + 1, k + 1], Z[i, k + 1])
            inside = [v >= level for v in vals]
            crossed = [inside[a] != inside[b] for a, b in _EDGE_CORNERS]
            count = sum(crossed)
            if count == 0:
                continue
            if count == 2:
                e1, e2 = [e for e in range(4) if crossed[e]]
                link(point(i, k, e1, vals), point(i, k, e2, vals))
                continue
            # saddle: cut off the corners that disagree with the centre
            centre_inside = sum(vals) / 4.0 >= level
            for c in range(4):
                if inside[c] != centre_inside:
                    e1, e2 = _CORNER_EDGES[c]
                    link(point(i, k, e1, vals), point(i, k, e2, vals))

    return [LevelPolyline(tag, float(level), np.array([points[k] for k in chain])) for chain in _stitch(links)]


def _corner_xy(i: int, k: int, c: int):
    return ((i, k), (i + 1, k), (i + 1, k + 1), (i, k + 1))[c]


def _stitch(links: dict) -> list[list]:
    seen = set()
    chains = []

    def walk(start):
        chain = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [v for v in links[cur] if v != prev and v not in seen]
            if not nxt:
                # close a loop if it returns to the start
                if prev is not None and start in links[cur] and len(chain) > 2:
                    chain.append(start)
                return chain
            prev, cur = cur, nxt[0]
            chain.append(cur)
            seen.add(cur)

    ends = sorted(k for k, v in links.items() if len(v) == 1)
    for k in ends:
        if k not in seen:
            chains.append(walk(k))
    for k in sorted(links):
        if k not in seen:
            chains.append(walk(k))
    return chains


def _orient(poly: np.ndarray) -> np.ndarray:
    return poly[::-1] if (poly[-1, 0], poly[-1, 1]) < (poly[0, 0], poly[0, 1]) else poly


def levels(grid: ContourGrid, tag: str, level: float) -> list[LevelPolyline]:
    """:func:`extract_level` with every polyline oriented by increasing ``n``."""
    out = [LevelPolyline(p.surface, p.level, _orient(p.vertices)) for p in extract_level(grid, tag, level)]
    return sorted(out, key=lambda p: (p.vertices[0, 0], p.vertices[0, 1]))


def _intersections(a: np.ndarray, b: np.ndarray) -> list[tuple[float, float]]:
    hits = []
    for p0, p1 in zip(a[:-1], a[1:]):
        r = p1 - p0
        for q0, q1 in zip(b[:-1], b[1:]):
            s = q1 - q0
            den = r[0] * s[1] - r[1] * s[0]
            if den == 0:
                continue
            d = q0 - p0
            t = (d[0] * s[1] - d[1] * s[0]) / den
            u = (d[0] * r[1] - d[1] * r[0]) / den
            if 0 <= t <= 1 and 0 <= u <= 1:
                hits.append((p0[0] + t * r[0], p0[1] + t * r[1]))
    return hits


@dataclass(frozen=True)
class Crossing:
    n: float
    gamma: float
    intersection: tuple[float, float] | None


def crossing_point(grid: ContourGrid, level_power: float | None = None, level_type1: float | None = None) -> Crossing | None:
    """Smallest grid ``n`` at or right of the contour intersection with a feasible gamma.

    The contours locate the crossing only to within a grid cell, so a column
    counts as "at" the crossing when its cell contains it.  Feasibility is
    then decided on the grid counts, and the smallest feasible gamma at that
    ``n`` is returned.  ``None`` when no column is feasible.
    """
    level_power = 1 - grid.beta if level_power is None else level_power
    level_type1 = grid.alpha if level_type1 is None else level_type1
    pw = extract_level(grid, POWER, level_power)
    t1 = extract_level(grid, TYPE1, level_type1)
    hits = [h for a in pw for b in t1 for h in _intersections(a.vertices, b.vertices)]
    feas = grid.feasible_mask()
    cols = np.flatnonzero(feas.any(axis=1))
    if cols.size == 0:
        return None
    first = None
    if hits:
        first = tuple(float(v) for v in min(hits))
        cell_left = np.searchsorted(grid.n, first[0], side="right") - 1
        cols = cols[cols >= cell_left]
        if cols.size == 0:
            return None
    i = int(cols[0])
    k = int(np.flatnonzero(feas[i])[0])
    return Crossing(float(grid.n[i]), float(grid.gamma[k]), first)
