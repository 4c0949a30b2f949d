
import numpy as np
import pytest

from postdesign.contour import (
    POWER,
    ContourGrid,
    build_grid,
    crossing_point,
    default_window,
    extract_level,
    levels,
)
from postdesign.design import direct_oc, optimize

from test_design import toy_config


def _grid(power, type1, n=None, gamma=None, m=100, alpha=0.05, beta=0.2):
    power, type1 = np.asarray(power, float), np.asarray(type1, float)
    n = np.arange(power.shape[0], dtype=float) + 10 if n is None else n
    gamma = np.linspace(0.5, 0.99, power.shape[1]) if gamma is None else gamma
    return ContourGrid(n, gamma, power, type1, np.rint(power * m).astype(int), np.rint(type1 * m).astype(int), m, alpha, beta)


def test_constant_surface_has_no_level_set():
    g = _grid(np.full((5, 6), 0.3), np.zeros((5, 6)))
    assert extract_level(g, POWER, 0.8) == []


def test_identity_surface_gives_horizontal_line():
    gamma = np.linspace(0.9, 0.99, 10)
    f = np.tile(gamma, (7, 1))
    g = _grid(f, f, gamma=gamma)
    polys = levels(g, POWER, 0.95)
    assert len(polys) == 1
    v = polys[0].vertices
    assert v[:, 1] == pytest.approx(0.95)
    assert v[0, 0] == g.n[0] and v[-1, 0] == g.n[-1]
    assert np.all(np.diff(v[:, 0]) > 0)


def test_closed_loop():
    x = np.linspace(-1, 1, 21)
    r = np.sqrt(x[:, None] ** 2 + x[None, :] ** 2)
    z = np.clip(1 - r, 0, 1)
    g = _grid(z, z, n=x, gamma=np.linspace(0.5, 0.9, 21))
    polys = extract_level(g, POWER, 0.5)
    assert len(polys) == 1
    v = polys[0].vertices
    assert np.array_equal(v[0], v[-1])
    # the loop is the circle of radius 0.5 in index units
    radius = np.hypot(v[:, 0], (v[:, 1] - 0.7) / 0.2)
    assert radius == pytest.approx(0.5, abs=0.03)


def test_saddle_uses_centre():
    z = np.array([[1.0, 0.0], [0.0, 1.0]])
    g = _grid(z, z, n=np.array([0.0, 1.0]), gamma=np.array([0.5, 0.6]))
    # centre 0.5 >= level 0.4 joins the two high corners
    assert len(extract_level(g, POWER, 0.4)) == 2
    assert len(extract_level(g, POWER, 0.6)) == 2


def test_level_bounds():
    g = _grid(np.zeros((3, 3)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        extract_level(g, POWER, 1.0)
    with pytest.raises(ValueError):
        g.surface("nope")


def test_crossing_feasible_everywhere():
    g = _grid(np.full((4, 5), 0.9), np.full((4, 5), 0.01))
    c = crossing_point(g)
    assert c.n == g.n[0] and c.gamma == g.gamma[0] and c.intersection is None


def test_crossing_never_feasible():
    g = _grid(np.full((4, 5), 0.5), np.full((4, 5), 0.5))
    assert crossing_point(g) is None


def test_crossing_analytic():
    # power falls in gamma and rises in n; type1 falls in gamma only
    n = np.arange(10, 31, dtype=float)
    gamma = np.linspace(0.5, 0.99, 50)
    power = np.clip(0.4 + 0.05 * (n[:, None] - 10) - 0.5 * (gamma[None, :] - 0.5), 0, 1)
    type1 = np.tile(np.clip(0.3 - 0.6 * (gamma - 0.5), 0, 1), (n.size, 1))
    g = _grid(power, type1, n=n, gamma=gamma, m=1000)
    c = crossing_point(g)
    # type1 <= 0.05 needs gamma >= 0.917, where power reaches 0.8 near n = 22.2
    feas = g.feasible_mask()
    first = n[np.flatnonzero(feas.any(axis=1))[0]]
    assert c.n == first == 23
    assert c.intersection is not None and c.intersection[0] <= c.n


@pytest.fixture(scope="module")
def toy_rec():
    return optimize(toy_config(m=4000, seed=2))


def test_grid_from_optimizer(toy_rec):
    g = build_grid(toy_rec)
    t = toy_rec.trace
    assert toy_rec.gamma in g.gamma
    assert np.all(np.diff(g.power, axis=1) <= 0) and np.all(np.diff(g.type1, axis=1) <= 0)
    # anchor columns reproduce the simulated distributions exactly
    for n_anchor, sd1, sd0 in ((t.n_a, t.sd1_a, t.sd0_a), (t.n_b, t.sd1_b, t.sd0_b)):
        if n_anchor in g.n:
            i = int(np.flatnonzero(g.n == n_anchor)[0])
            assert np.array_equal(g.power_counts[i], [(sd1.probs >= x).sum() for x in g.gamma])
            assert np.array_equal(g.type1_counts[i], [(sd0.probs >= x).sum() for x in g.gamma])
    c = crossing_point(g)
    assert c.n == toy_rec.n


def test_grid_top_row_near_one(toy_rec):
    g = build_grid(toy_rec, gamma_range=(0.5, 1 - 1e-15), gamma_steps=20)
    # only probabilities that round to exactly 1.0 remain
    assert np.all(g.power[:, -1] <= 1e-3) and np.all(g.type1[:, -1] == 0)


def test_grid_argument_checks(toy_rec):
    with pytest.raises(ValueError):
        build_grid(toy_rec, n_range=(1, 30))
    with pytest.raises(ValueError):
        build_grid(toy_rec, gamma_range=(0.3, 0.9))


def test_power_level_matches_direct_oracle(toy_rec):
    # the 0.8-power gamma at n is the H1 threshold of a direct simulation
    g = build_grid(toy_rec, gamma_steps=400)
    n = int(toy_rec.n)
    poly = max(levels(g, POWER, 0.8), key=lambda p: len(p.vertices)).vertices
    v = poly[np.argmin(abs(poly[:, 0] - n))]
    cfg = toy_rec.trace.config
    oc = direct_oc(cfg, n, 0.5)
    assert v[1] == pytest.approx(oc.xi1, abs=0.01)


def test_default_window():
    n, gm = default_window(40, 0.95, 4, steps=11)
    assert n[0] == 24 and n[-1] == 60
    assert gm[0] == pytest.approx(0.8) and gm[-1] == pytest.approx(0.99)
    assert len(gm) == 11


@pytest.mark.slow
def test_weight_crossing_matches_optimizer():
    from pathlib import Path

    from postdesign.config import parse_config

    cfg = parse_config(Path(__file__).resolve().parents[1] / "configs" / "semaglutide_weight.toml")
    for seed in range(10):
        rec = optimize(cfg.replace(seed=seed))
        g = build_grid(rec)
        assert np.diff(g.gamma).max() <= 0.002
        i = int(np.flatnonzero(g.n == rec.n)[0])
        k = int(np.flatnonzero(g.gamma == rec.gamma)[0])
        assert g.feasible_mask()[i, k]
        assert crossing_point(g).n == rec.n
