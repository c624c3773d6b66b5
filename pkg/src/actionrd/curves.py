"""Tracing R(D, C): slope sweeps, the supporting-plane envelope, the zero-rate
boundary D_max(C), dual refinement at a target (D, C), and the baseline in
which actions are chosen independently of the source."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .solver import RdcPoint, SolverParams, Workspace, solve_point

log = logging.getLogger(__name__)

S_GRID = tuple(-0.25 * 2.0 ** (k / 2) for k in range(17))    # -0.25 ... -64
M_GRID = tuple(-0.125 * 2.0 ** (k / 2) for k in range(17))   # -0.125 ... -32
S_MAX = 256.0
M_MAX = 256.0


def zero_rate_table(scenario) -> np.ndarray:
    """Per action: (cost, smallest expected distortion of a fixed strategy).

    A zero-rate strategy picks t(y) separately for each y, so the minimum
    splits into one small minimization per side-information letter.
    """
    rows = []
    for a in range(scenario.n_a):
        joint = scenario.px[:, None] * scenario.channel[a]          # [x, y]
        best = (joint.T @ scenario.distortion).min(axis=1).sum()   # per y, min over xhat
        rows.append((float(scenario.cost[a]), float(best)))
    return np.array(rows)


def _dmax_from_table(table, C):
    cost, dist = table[:, 0], table[:, 1]
    ok = cost <= C + 1e-15
    best = dist[ok].min()
    for i in np.flatnonzero(ok):
        for j in np.flatnonzero(cost > C):
            lam = (cost[j] - C) / (cost[j] - cost[i])  # weight on the cheap one
            best = min(best, lam * dist[i] + (1 - lam) * dist[j])
    return float(best)


def d_max(scenario, C: float) -> float:
    """Smallest distortion reachable at zero rate with average cost <= C.

    The optimum mixes at most two strategies, so it is found by scanning the
    affordable single strategies and every pair that straddles the budget.
    """
    if C < 0:
        raise ValueError("cost budget must be >= 0")
    return _dmax_from_table(zero_rate_table(scenario), C)


@dataclass
class RdcCurve:
    points: list
    scenario_hash: str
    zero_rate: np.ndarray | None = field(default=None, repr=False)

    def arrays(self):
        """(s, m, R, D, C) columns as numpy arrays."""
        cols = np.array([(p.s, p.m, p.rate, p.distortion, p.cost) for p in self.points]).reshape(-1, 5)
        return tuple(cols.T)

    def extend(self, pts):
        self.points.extend(pts)

    @property
    def all_converged(self):
        return all(p.converged for p in self.points)


def evaluate_rdc(curve: RdcCurve, D: float, C: float) -> float:
    """Lower bound on R(D, C) from the supporting planes of the curve's points.

    Each point contributes R + s (D - D_pt) + m (C - C_pt); the envelope is
    the largest of these, clamped at 0. Targets at or beyond D_max(C) give 0
    when the curve carries its zero-rate table.
    """
    if curve.zero_rate is not None and D >= _dmax_from_table(curve.zero_rate, C) - 1e-12:
        return 0.0
    if not curve.points:
        raise ValueError("empty curve")
    s, m, R, Dp, Cp = curve.arrays()
    return float(max(0.0, np.max(R + s * (D - Dp) + m * (C - Cp))))


def sweep(scenario, s_grid=S_GRID, m_grid=M_GRID, params: SolverParams | None = None,
          ws: Workspace | None = None) -> RdcCurve:
    """One cold-started solve per (s, m) cell, in row-major grid order."""
    if any(v > 0 for v in s_grid) or any(v > 0 for v in m_grid):
        raise ValueError("grids must be non-positive")
    params = params or SolverParams()
    ws = ws or Workspace(scenario, params)
    pts = [solve_point(scenario, s, m, params, ws=ws) for s in s_grid for m in m_grid]
    bad = sum(not p.converged for p in pts)
    if bad:
        log.warning("%d of %d sweep points did not converge", bad, len(pts))
    return RdcCurve(pts, scenario.fingerprint, zero_rate_table(scenario))


def _planes(points, D, C):
    s, m, R, Dp, Cp = (np.array(v) for v in zip(*[(p.s, p.m, p.rate, p.distortion, p.cost)
                                                   for p in points]))
    return R + s * (D - Dp) + m * (C - Cp), s, m, R, Dp, Cp


def _model_max(points, D, C, free_m):
    """Maximize the cutting-plane upper model of the dual at (D, C).

    With solved points k the dual g(s, m) = min F + s D + m C is bounded by
    min_k [R_k + s (D - D_k) + m (C - C_k)]; the bound is maximized by a
    small linear program over (s, m, z).
    """
    _, s, m, R, Dp, Cp = _planes(points, D, C)
    A = np.column_stack([-(D - Dp), -(C - Cp), np.ones_like(R)])
    bounds = [(-S_MAX, 0.0), (-M_MAX, 0.0) if free_m else (0.0, 0.0), (None, None)]
    res = linprog([0.0, 0.0, -1.0], A_ub=A, b_ub=R, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"cutting-plane program failed: {res.message}")
    return float(res.x[0]), float(res.x[1]), float(-res.fun)


SEED_SLOPES = ((-0.25, -0.125), (-1.0, -0.5), (-4.0, -2.0), (-16.0, -8.0), (-64.0, -32.0),
               (-1.0, -8.0), (-8.0, -1.0))


def rd_at(scenario, D: float, C: float, params: SolverParams | None = None, *,
          curve: RdcCurve | None = None, ws: Workspace | None = None, solve=None,
          tol: float = 2e-4, max_evals: int = 40) -> float:
    """R(D, C) by maximizing the concave dual over the slopes (s, m) <= 0.

    Every solved point k is a supergradient cut, so the best plane at (D, C)
    is a lower bound and the cutting-plane model maximum an upper bound; new
    slopes are solved at the model maximizer until the two meet within
    ``tol``. Solved points are appended to ``curve`` when one is given, which
    tightens its envelope at (D, C). ``solve(s, m)`` overrides the solver.
    """
    params = params or SolverParams()
    table = zero_rate_table(scenario)
    if D >= _dmax_from_table(table, C) - 1e-12:
        return 0.0
    if solve is None:
        ws = ws or Workspace(scenario, params)

        def solve(s, m):
            return solve_point(scenario, s, m, params, ws=ws)
    free_m = C < table[:, 0].max() and scenario.n_a > 1
    known = list(curve.points) if curve is not None else []
    new = []
    if not known:
        new = [solve(s, m if free_m else 0.0) for s, m in SEED_SLOPES]
    seen = {(p.s, p.m) for p in known + new}
    lower = -math.inf
    for _ in range(max_evals):
        pts = known + new
        lower = float(np.max(_planes(pts, D, C)[0]))
        s, m, upper = _model_max(pts, D, C, free_m)
        if upper - lower <= tol:
            break
        key = (s, m)
        if key in seen:  # the model cannot move: the cut set is exhausted
            break
        seen.add(key)
        new.append(solve(s, m))
    else:
        log.warning("dual search at D=%g C=%g stopped with gap %.2e", D, C, upper - lower)
    if curve is not None:
        curve.extend(new)
    return max(lower, 0.0)


def refine(curve: RdcCurve, scenario, targets, params: SolverParams | None = None,
           ws: Workspace | None = None, solve=None) -> RdcCurve:
    """Tighten the envelope at each (D, C) target in turn."""
    params = params or SolverParams()
    if solve is None:
        ws = ws or Workspace(scenario, params)
    for D, C in targets:
        rd_at(scenario, D, C, params, curve=curve, ws=ws, solve=solve)
    return curve


class NonAdaptive:
    """Baseline with the action drawn independently of the source.

    Then the rate splits into per-action side-information problems, and for
    slopes (s, m) the dual value is min_a [L_a(s) - m cost(a)], where L_a(s)
    is the optimum of the single-action problem at slope s. The point for
    (s, m) is the minimizing action's (R_a, D_a, cost(a)).
    """

    def __init__(self, scenario, params: SolverParams | None = None, keep_ptx: bool = False):
        self.scenario = scenario
        self.params = params or SolverParams()
        self.subs = [scenario.restrict_action(a) for a in range(scenario.n_a)]
        self.spaces = [Workspace(sub, self.params) for sub in self.subs]
        self.cache = {}
        # the single-action strategy list equals block a of the full list
        self.full = Workspace(scenario, self.params) if keep_ptx else None

    def branch(self, a, s):
        key = (a, float(s))
        if key not in self.cache:
            self.cache[key] = solve_point(self.subs[a], s, 0.0, self.params, ws=self.spaces[a],
                                          keep_ptx=self.full is not None)
        return self.cache[key]

    def _embed(self, a, ptx):
        out = np.zeros((self.scenario.n_x, self.full.n_t))
        out[:, self.full.space.blocks[a]] = ptx
        return out

    def point(self, s, m) -> RdcPoint:
        best = None
        for a in range(self.scenario.n_a):
            p = self.branch(a, s)
            c = float(self.scenario.cost[a])
            val = p.rate - s * p.distortion - m * c
            if best is None or val < best[0] - 1e-12:
                best = (val, a, p)
        val, a, p = best
        ptx = self._embed(a, p.ptx) if self.full is not None else None
        return RdcPoint(s, m, p.rate, p.distortion, float(self.scenario.cost[a]), p.converged,
                        p.iterations, F=val, ptx=ptx)



def nonadaptive_curve(scenario, params: SolverParams | None = None, s_grid=S_GRID,
                      m_grid=M_GRID, targets=()) -> RdcCurve:
    """Sweep the independent-action baseline; optionally refine at targets."""
    na = NonAdaptive(scenario, params)
    pts = [na.point(s, m) for s in s_grid for m in m_grid]
    curve = RdcCurve(pts, scenario.fingerprint, zero_rate_table(scenario))
    for D, C in targets:
        rd_at(scenario, D, C, params, curve=curve, solve=na.point)
    return curve


def nonadaptive_rd_at(scenario, D, C, params=None, baseline: NonAdaptive | None = None,
                      curve: RdcCurve | None = None) -> float:
    baseline = baseline or NonAdaptive(scenario, params)
    return rd_at(scenario, D, C, params, curve=curve, solve=baseline.point)


def slice_is_convex(D, R, slack=1e-3) -> bool:
    """Non-increasing and convex (up to ``slack``) samples of R(D)."""
    D, R = np.asarray(D, float), np.asarray(R, float)
    order = np.argsort(D)
    D, R = D[order], R[order]
    if np.any(np.diff(R) > slack):
        return False
    for i in range(1, len(D) - 1):
        lam = (D[i + 1] - D[i]) / (D[i + 1] - D[i - 1])
        if R[i] > lam * R[i - 1] + (1 - lam) * R[i + 1] + slack:
            return False
    return True


def time_share(points, D: float, C: float):
    """Weights lambda_k minimizing sum lambda_k R_k subject to the mixed
    distortion <= D and mixed cost <= C. Returns (weights, rate bound)."""
    _, s, m, R, Dp, Cp = _planes(points, D, C)
    res = linprog(R, A_ub=np.vstack([Dp, Cp]), b_ub=[D, C], A_eq=np.ones((1, len(R))), b_eq=[1.0],
                  bounds=[(0, None)] * len(R), method="highs")
    if res.status != 0:
        raise ValueError(f"(D, C) = ({D}, {C}) is outside the hull of the solved points")
    return res.x, float(res.fun)


def design_conditional(scenario, D: float, C: float, params: SolverParams | None = None,
                       ws: Workspace | None = None, tol: float = 2e-4):
    """A strategy conditional P(t|x) meeting (D, C) at rate close to R(D, C).

    Solves the dual at (D, C), keeping each point's conditional, then mixes
    the conditionals with time-sharing weights; the rate is convex in P(t|x),
    so the mixture's rate is at most the time-sharing bound. Returns
    (ptx, workspace, rate bound, dual lower bound).
    """
    params = params or SolverParams()
    ws = ws or Workspace(scenario, params)
    kept = []

    def solve(s, m):
        p = solve_point(scenario, s, m, params, ws=ws, keep_ptx=True)
        kept.append(p)
        return p

    ptx, upper, lower = _mixture(scenario, D, C, params, solve, kept, tol)
    return ptx, ws, upper, lower


def _mixture(scenario, D, C, params, solve, kept, tol):
    grid = [solve(s, m) for s, m in SEED_SLOPES]
    grid.append(solve(0.0, 0.0))
    curve = RdcCurve(list(grid), scenario.fingerprint, zero_rate_table(scenario))
    lower = rd_at(scenario, D, C, params, curve=curve, solve=solve, tol=tol)
    lam, upper = time_share(kept, D, C)
    ptx = sum(w * p.ptx for w, p in zip(lam, kept) if w > 1e-12)
    return ptx / ptx.sum(axis=1, keepdims=True), upper, lower


def nonadaptive_design_conditional(scenario, D: float, C: float, params: SolverParams | None = None,
                                   tol: float = 2e-4):
    """As ``design_conditional`` but with the action independent of the source.

    Each solved point plays one action, so the time-sharing mixture has
    P(a|x) = P(a) for every x. Returns (ptx, workspace, rate bound, lower bound).
    """
    na = NonAdaptive(scenario, params, keep_ptx=True)
    kept = []

    def solve(s, m):
        p = na.point(s, m)
        kept.append(p)
        return p

    ptx, upper, lower = _mixture(scenario, D, C, na.params, solve, kept, tol)
    return ptx, na.full, upper, lower
