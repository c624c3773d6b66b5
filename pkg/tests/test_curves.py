import itertools

import numpy as np
import pytest

from actionrd.curves import (RdcCurve, d_max, evaluate_rdc, nonadaptive_rd_at, rd_at, slice_is_convex,
                             sweep, time_share)
from actionrd.scenario import analytic_rdc, build_erasure
from actionrd.solver import RdcPoint
from oracles import all_strategies, random_instance


def _strategy_table(sc):
    """(cost, expected distortion) of every strategy, straight from the arrays."""
    recon, acts = all_strategies(sc.n_xhat, sc.n_y, sc.n_a)
    rows = []
    for r, a in zip(recon, acts):
        d = sum(sc.px[x] * sc.channel[a, x, y] * sc.distortion[x, r[y]]
                for x in range(sc.n_x) for y in range(sc.n_y))
        rows.append((sc.cost[a], d))
    return np.array(rows)


def _grid_dmax(sc, C, step=0.01):
    # the optimum over the P_T simplex has at most two atoms; scan pairs on a grid
    tab = _strategy_table(sc)
    tab = np.unique(np.round(tab, 12), axis=0)
    lam = np.arange(0, 1 + step / 2, step)
    best = np.inf
    for i, j in itertools.combinations_with_replacement(range(len(tab)), 2):
        c = lam * tab[i, 0] + (1 - lam) * tab[j, 0]
        d = lam * tab[i, 1] + (1 - lam) * tab[j, 1]
        ok = c <= C + 1e-12
        if ok.any():
            best = min(best, d[ok].min())
    return best


@pytest.mark.parametrize("C", [0.0, 0.5, 1.0])
def test_dmax_erasure(C):
    sc = build_erasure(K=4, q=0.5, p=0.0)
    got = d_max(sc, C)
    assert got == pytest.approx(_grid_dmax(sc, C), abs=1e-9)
    if C == 0.0:
        assert got == pytest.approx(0.375)
    if C == 1.0:
        assert got == pytest.approx(0.0)


@pytest.mark.parametrize("seed", range(4))
def test_dmax_random_instances(seed):
    sc = random_instance(np.random.default_rng(seed))
    for C in (0.0, 0.2, 0.6, 1.0):
        assert d_max(sc, C) <= _grid_dmax(sc, C) + 1e-12
        assert d_max(sc, C) >= _grid_dmax(sc, C, step=0.001) - 1e-3


def test_envelope_supports_its_points_and_clamps():
    sc = build_erasure(K=4, q=0.5, p=0.0)
    curve = sweep(sc, [-0.5, -2.0, -8.0], [-0.5, -2.0])
    for p in curve.points:
        assert evaluate_rdc(curve, p.distortion, p.cost) >= p.rate - 1e-12
    assert evaluate_rdc(curve, d_max(sc, 0.25) + 1e-6, 0.25) == 0.0
    with pytest.raises(ValueError):
        evaluate_rdc(RdcCurve([], "x"), 0.1, 0.1)


def test_envelope_is_max_of_planes():
    pts = [RdcPoint(-1.0, -1.0, 1.0, 0.1, 0.2, True, 1), RdcPoint(-2.0, 0.0, 0.5, 0.3, 0.1, True, 1)]
    curve = RdcCurve(pts, "h")
    assert evaluate_rdc(curve, 0.2, 0.2) == pytest.approx(max(1.0 - 0.1, 0.5 + 0.2))


@pytest.mark.parametrize("D,C", [(0.1, 0.25), (0.05, 0.5)])
def test_dual_search_against_closed_form(D, C):
    sc = build_erasure(K=4, q=0.5, p=0.0)
    assert rd_at(sc, D, C) == pytest.approx(analytic_rdc(D, C), abs=1e-3)


def test_nonadaptive_is_worse_and_endpoints():
    sc = build_erasure(K=4, q=0.5, p=0.0)
    adaptive = rd_at(sc, 0.1, 0.5)
    baseline = nonadaptive_rd_at(sc, 0.1, 0.5)
    assert baseline >= adaptive - 1e-4
    assert nonadaptive_rd_at(sc, 0.0, 1.0) == 0.0
    # no budget: a single usable action, so both problems coincide
    assert nonadaptive_rd_at(sc, 0.1, 0.0) == pytest.approx(analytic_rdc(0.1, 0.0), abs=1e-3)


def test_time_share_hits_target():
    pts = [RdcPoint(0, 0, 0.0, 0.4, 0.0, True, 1), RdcPoint(-1, -1, 1.0, 0.0, 1.0, True, 1)]
    lam, bound = time_share(pts, 0.2, 0.5)
    assert bound == pytest.approx(0.5)
    assert lam @ [0.4, 0.0] <= 0.2 + 1e-9


def test_slice_shape_checker():
    D = np.linspace(0, 1, 11)
    assert slice_is_convex(D, (1 - D) ** 2)
    assert not slice_is_convex(D, np.sqrt(1 - D))
    assert not slice_is_convex(D, D)
