"""Alternating minimization for the rate-distortion-cost function.

For fixed slopes ``s <= 0`` (distortion) and ``m <= 0`` (cost) the solver
minimizes the convex functional F over the strategy conditional P(t|x) and
two auxiliary marginals, Q_A over actions and Q_TY over (strategy, side info).
Each auxiliary update has a closed form; the P(t|x) update is solved through
the action conditional P(a|x), which satisfies a damped fixed-point equation
whose row-normalization multipliers mu_x are found by an outer dual loop.

All logarithms are base 2. Conditionals are stored as ``[x, t]`` arrays.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import AbsoluteContinuityViolation, DivergenceDetected, MaxIterations
from .prob import entropy
from .strategy import StrategySpace, enumerate_strategies

log = logging.getLogger(__name__)

BLOWUP = 1e30


@dataclass(frozen=True)
class SolverParams:
    """Numerical settings shared by every (s, m) point.

    ``dual_step`` is ``"normalized"`` (mu_x -= log2 of the row sum, converges
    in a handful of steps) or ``"subgradient"`` (mu_x += theta_i (1 - sum)/P(x)
    with theta_i = 1/i). ``prune`` keeps only reconstructions that are not
    dominated on the letters able to produce each side-information symbol.
    """

    beta: float = 0.5
    outer_tol: float = 1e-8
    inner_tol: float = 1e-7
    fp_tol: float = 1e-10
    max_outer: int = 20000
    max_dual: int = 2000
    max_fp: int = 10000
    dual_step: str = "normalized"
    prune: bool = True
    strategy_cap: int = 10**6

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if min(self.outer_tol, self.inner_tol, self.fp_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if min(self.max_outer, self.max_dual, self.max_fp) < 1:
            raise ValueError("iteration caps must be positive")
        if self.dual_step not in ("normalized", "subgradient"):
            raise ValueError("dual_step must be 'normalized' or 'subgradient'")

    @staticmethod
    def theta(i: int) -> float:
        return 1.0 / i


@dataclass
class RdcPoint:
    s: float
    m: float
    rate: float
    distortion: float
    cost: float
    converged: bool
    iterations: int
    F: float = math.nan
    ptx: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        # round-off can leave tiny negatives
        self.rate = max(self.rate, 0.0)
        self.distortion = max(self.distortion, 0.0)
        self.cost = max(self.cost, 0.0)

    def as_row(self):
        return (self.s, self.m, self.rate, self.distortion, self.cost, self.converged, self.iterations)


class Workspace:
    """Strategy tables for one scenario, built once and shared by all points.

    ``W[t, x, y]`` is P(y | x, a(t)); ``dexp[t, x]`` is E[d(x, t(Y)) | x, a(t)].
    """

    def __init__(self, scenario, params: SolverParams | None = None, space: StrategySpace | None = None):
        params = params or SolverParams()
        self.scenario = scenario
        if space is None:
            choices = scenario.recon_choices() if params.prune else None
            space = enumerate_strategies(scenario.n_xhat, scenario.n_y, scenario.n_a,
                                         cap=params.strategy_cap, choices=choices)
        self.space = space
        self.px = np.ascontiguousarray(scenario.px, dtype=float)
        self.channel = np.ascontiguousarray(scenario.channel, dtype=float)
        self.actions = space.actions
        self.W = self.channel[self.actions]
        dist = scenario.distortion  # [x, xhat]
        d_txy = dist[:, space.recon].transpose(1, 0, 2)  # [t, x, y]
        self.dexp = np.einsum("txy,txy->tx", self.W, d_txy)
        self.cost_t = scenario.cost[self.actions]
        self.live = self.W > 0

    @property
    def n_t(self):
        return len(self.actions)


def _workspace(scenario, params, ws):
    if ws is not None:
        return ws
    return Workspace(scenario, params)


def update_qa(ptx, px, actions, n_actions) -> np.ndarray:
    """Q_A(a) = sum_x P(x) sum_{t in T^a} P(t|x), the induced action marginal."""
    pt = np.asarray(px, dtype=float) @ np.asarray(ptx, dtype=float)
    return np.bincount(actions, weights=pt, minlength=n_actions)


def update_qty(ptx, px, W) -> np.ndarray:
    """Q_TY(t, y) = sum_x P(x) P(y|x, a(t)) P(t|x), indexed ``[t, y]``."""
    return np.einsum("x,xt,txy->ty", px, ptx, W)


def _wlogq(ws: Workspace, qty):
    """Sum_y P(y|x,a(t)) log2 Q_TY(t,y) as ``[t, x]``; -inf where Q_TY vanishes
    on a letter the channel can produce."""
    pos = qty > 0
    lq = np.log2(np.where(pos, qty, 1.0))
    out = np.einsum("txy,ty->tx", ws.W, lq)
    dead = np.any(ws.live & ~pos[:, None, :], axis=2)
    out[dead] = -np.inf
    return out


def _logsumexp2(v, axis=0):
    top = np.max(v, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log2(np.sum(np.exp2(v - safe), axis=axis, keepdims=True)) + safe
    return np.squeeze(out, axis=axis)


def compute_log_alphas(qa, qty, scenario, s, m, ws: Workspace | None = None, wlogq=None):
    """Log2 of the per-strategy and per-action weights, ``[t, x]`` and ``[a, x]``.

    A strategy whose action has Q_A = 0, or whose Q_TY column vanishes where
    the channel puts mass, gets weight 0 (log -inf).
    """
    ws = _workspace(scenario, None, ws)
    if wlogq is None:
        wlogq = _wlogq(ws, qty)
    with np.errstate(divide="ignore"):
        la = np.log2(np.asarray(qa, dtype=float))
    base = la + m * scenario.cost
    la_t = base[ws.actions][:, None] + s * ws.dexp + wlogq
    la_t[~np.isfinite(base[ws.actions])] = -np.inf
    la_a = np.stack([_logsumexp2(la_t[ws.space.blocks[a]], axis=0) if len(ws.space.members(a))
                     else np.full(scenario.n_x, -np.inf) for a in range(scenario.n_a)])
    return la_t, la_a


def compute_alphas(qa, qty, scenario, s, m, ws: Workspace | None = None):
    """Linear-domain weights (alpha_tx ``[t, x]``, alpha_ax ``[a, x]``)."""
    la_t, la_a = compute_log_alphas(qa, qty, scenario, s, m, ws)
    return np.exp2(la_t), np.exp2(la_a)


def fixed_point_step(pax, mu, alpha_ax, scenario, beta):
    """One damped update g of the action conditional, linear domain.

    ``pax`` is ``[a, x]`` and is floored at 1e-300 before use.
    """
    pax = np.maximum(np.asarray(pax, dtype=float), 1e-300)
    ch = scenario.channel
    pya = np.einsum("x,axy,ax->ay", scenario.px, ch, pax)
    logden = np.einsum("axy,ay->ax", ch, np.log2(np.maximum(pya, 1e-300)))
    with np.errstate(over="ignore", divide="ignore"):
        target = np.exp2(np.asarray(mu)[None, :] + np.log2(alpha_ax) - logden)
        g = pax ** beta * target ** (1.0 - beta)
    if not np.all(np.isfinite(g)) or np.any(g > BLOWUP):
        raise DivergenceDetected("fixed-point iterate exceeded 1e30")
    return g


def log_fixed_point_map(q, mu, log_alpha_ax, scenario, beta):
    """The same map in the log domain: returns G(q) for q = log2 P(a|x)."""
    q = np.ascontiguousarray(q, dtype=float)
    out = np.empty_like(q)
    _kernels.log_map(q, np.ascontiguousarray(mu, dtype=float), np.ascontiguousarray(log_alpha_ax),
                     np.ascontiguousarray(scenario.px, dtype=float),
                     np.ascontiguousarray(scenario.channel, dtype=float), beta, out)
    return out


def _recover(ws, la_t, la_a, q):
    """P(t|x) = 2^(la_t - la_a) P(a(t)|x), rows renormalized; ``[x, t]``."""
    a = ws.actions
    with np.errstate(invalid="ignore"):
        expo = la_t - la_a[a] + q[a]
    expo[~np.isfinite(expo)] = -np.inf
    ptx = np.exp2(expo).T
    rows = ptx.sum(axis=1, keepdims=True)
    bad = rows[:, 0] <= 0
    if np.any(bad):
        ptx[bad] = 1.0 / ptx.shape[1]
        rows[bad] = 1.0
    return ptx / rows


def _pax(ws, ptx):
    pax = np.zeros((ws.scenario.n_a, ws.scenario.n_x))
    for a in range(ws.scenario.n_a):
        pax[a] = ptx[:, ws.space.blocks[a]].sum(axis=1)
    return pax


def _induced_q(ws, ptx):
    with np.errstate(divide="ignore"):
        return np.log2(_pax(ws, ptx))


def inner_minimize(qa, qty, scenario, s, m, params: SolverParams | None = None, *,
                   ws: Workspace | None = None, q0=None, mu0=None, stats=None):
    """Minimize F over P(t|x) for fixed Q_A and Q_TY.

    Runs the fixed point for log2 P(a|x) inside the dual loop on mu, then
    recovers P(t|x). Returns ``ptx`` as ``[x, t]``. ``q0``/``mu0`` warm-start
    the iteration; ``stats`` (a dict) receives counters and the final state.
    """
    params = params or SolverParams()
    ws = _workspace(scenario, params, ws)
    wlogq = _wlogq(ws, qty)
    la_t, la_a = compute_log_alphas(qa, qty, scenario, s, m, ws, wlogq)
    la_a = np.ascontiguousarray(la_a)
    if q0 is None:
        q = np.full((scenario.n_a, scenario.n_x), -math.log2(scenario.n_a))
    else:
        q = np.array(q0, dtype=float)
    q = np.where(np.isfinite(la_a), np.maximum(q, _kernels.LOG2_FLOOR), -np.inf)
    mu = np.ones(scenario.n_x) if mu0 is None else np.array(mu0, dtype=float)
    status, n_dual, n_fp, worst = _kernels.dual_loop(
        q, mu, la_a, ws.px, ws.channel, params.beta, params.fp_tol, params.inner_tol,
        params.max_fp, params.max_dual, params.dual_step == "subgradient")
    if status == _kernels.DIVERGED:
        raise DivergenceDetected("fixed-point iterate exceeded 1e30")
    ptx = _recover(ws, la_t, la_a, q)
    if stats is not None:
        stats.update(q=q, mu=mu, dual_iters=n_dual, fp_iters=n_fp, violation=worst,
                     wlogq=wlogq, status=status)
    if status != _kernels.CONVERGED:
        what = "dual" if status == _kernels.DUAL_CAP else "fixed-point"
        raise MaxIterations(f"{what} loop hit its cap (row-sum error {worst:.2e})", best=ptx)
    return ptx


def eval_F(ptx, qty, qa, scenario, s, m, ws: Workspace | None = None) -> float:
    """The functional F, term by term.

    F = sum P(y,a) log P(y,a)/Q_A(a) - E log P(y|x,a)
        + sum_x P(x) D(P(y,t|x) || Q_TY) - s E d - m E cost.
    """
    ws = _workspace(scenario, None, ws)
    px, W = ws.px, ws.W
    ptx = np.asarray(ptx, dtype=float)
    qty = np.asarray(qty, dtype=float)
    qa = np.asarray(qa, dtype=float)
    pxty = px[:, None, None] * ptx[:, :, None] * W.transpose(1, 0, 2)  # [x, t, y]
    mass = pxty > 0

    pya = np.zeros((scenario.n_a, scenario.n_y))
    np.add.at(pya, ws.actions, pxty.sum(axis=0))
    pa = pya.sum(axis=1)
    if np.any((pa > 0) & (qa <= 0)):
        raise AbsoluteContinuityViolation("Q_A vanishes on an action in use")
    on = pya > 0
    t1 = float(np.sum(pya[on] * (np.log2(pya[on]) - np.log2(np.broadcast_to(qa[:, None], pya.shape)[on]))))

    Wx = np.broadcast_to(W.transpose(1, 0, 2), pxty.shape)
    t2 = -float(np.sum(pxty[mass] * np.log2(Wx[mass])))

    qb = np.broadcast_to(qty[None], pxty.shape)
    if np.any(qb[mass] <= 0):
        raise AbsoluteContinuityViolation("Q_TY vanishes where P(t, y | x) does not")
    ptxb = np.broadcast_to(ptx[:, :, None], pxty.shape)
    t3 = float(np.sum(pxty[mass] * (np.log2(ptxb[mass] * Wx[mass]) - np.log2(qb[mass]))))

    D, C = expected_distortion_cost(ptx, ws)
    return t1 + t2 + t3 - s * D - m * C


def _fast_F(ptx, qa, wlogq, pax, ws, s, m, D, C):
    """F using a precomputed sum_y W log Q_TY; same value as eval_F."""
    px = ws.px
    pya = np.einsum("x,axy,ax->ay", px, ws.channel, pax)
    w = px[:, None] * ptx
    pa = pya.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.sum(np.where(pya > 0, pya * np.log2(pya), 0.0))
        t1 -= np.sum(np.where(pa > 0, pa * np.log2(np.where(qa > 0, qa, 1.0)), 0.0))
        t2 = np.sum(np.where(w > 0, w * np.log2(np.where(ptx > 0, ptx, 1.0)), 0.0))
        t3 = -np.sum(np.where(w > 0, w * wlogq.T, 0.0))
    return float(t1 + t2 + t3 - s * D - m * C)


def expected_distortion_cost(ptx, ws: Workspace):
    w = ws.px[:, None] * np.asarray(ptx)
    return float(np.sum(w * ws.dexp.T)), float(np.sum(w * ws.cost_t[None, :]))


def rate_of(ptx, ws: Workspace) -> float:
    """I(X;A) + I(X;T|Y,A) in bits for the joint induced by ``ptx``."""
    px = ws.px
    pxty = px[:, None, None] * ptx[:, :, None] * ws.W.transpose(1, 0, 2)
    pxa = np.zeros((ws.scenario.n_x, ws.scenario.n_a))
    for a in range(ws.scenario.n_a):
        pxa[:, a] = pxty[:, ws.space.blocks[a]].sum(axis=(1, 2))
    pya = np.zeros((ws.scenario.n_a, ws.scenario.n_y))
    np.add.at(pya, ws.actions, pxty.sum(axis=0))
    pxya = np.zeros((ws.scenario.n_x, ws.scenario.n_a, ws.scenario.n_y))
    for a in range(ws.scenario.n_a):
        pxya[:, a] = pxty[:, ws.space.blocks[a]].sum(axis=1)
    i_xa = entropy(px) + entropy(pxa.sum(axis=0)) - entropy(pxa)
    i_cond = entropy(pxya) + entropy(pxty.sum(axis=0)) - entropy(pxty) - entropy(pya)
    return max(i_xa + i_cond, 0.0)


def _blend_start(ptx, n_t, weight=1e-3):
    """Mix a warm start with the uniform conditional so no strategy is dead."""
    return (1.0 - weight) * np.asarray(ptx) + weight / n_t


def solve_point(scenario, s: float, m: float, params: SolverParams | None = None, *,
                ws: Workspace | None = None, init=None, trace=None, keep_ptx=False) -> RdcPoint:
    """One point (R, D, C) on the curve, the one supported by slopes (s, m).

    ``init`` is an optional ``[x, t]`` warm start; near-degenerate starts can
    stall, so cold starts are the safe default. If ``trace`` is a list it
    receives F after each of the three block updates of every iteration.
    """
    if s > 0 or m > 0:
        raise ValueError("slopes s and m must be <= 0")
    params = params or SolverParams()
    ws = _workspace(scenario, params, ws)
    nt, nx, na = ws.n_t, scenario.n_x, scenario.n_a
    ptx = np.full((nx, nt), 1.0 / nt) if init is None else _blend_start(init, nt)
    q = np.ascontiguousarray(_induced_q(ws, ptx))
    mu = np.ones(nx)
    qa = np.empty(na)
    qty = np.empty((nt, scenario.n_y))
    wlogq = np.empty((nt, nx))
    la_t = np.empty((nt, nx))
    la_a = np.empty((na, nx))
    starts = np.array([b.start for b in ws.space.blocks], dtype=np.int64)
    stops = np.array([b.stop for b in ws.space.blocks], dtype=np.int64)
    cost = np.ascontiguousarray(scenario.cost, dtype=float)
    sub = params.dual_step == "subgradient"
    converged = True
    F_prev = math.inf
    qty_prev = None
    it = 0
    for it in range(1, params.max_outer + 1):
        _kernels.prepare(ptx, ws.px, ws.W, ws.actions, starts, stops, cost, ws.dexp, s, m,
                         qa, qty, wlogq, la_t, la_a)
        if trace is not None and qty_prev is not None:
            trace.append(eval_F(ptx, qty_prev, qa, scenario, s, m, ws))
            trace.append(eval_F(ptx, qty, qa, scenario, s, m, ws))
        q = np.where(np.isfinite(la_a), np.maximum(q, _kernels.LOG2_FLOOR), -np.inf)
        status, _, _, worst = _kernels.dual_loop(q, mu, la_a, ws.px, ws.channel, params.beta,
                                                 params.fp_tol, params.inner_tol, params.max_fp,
                                                 params.max_dual, sub)
        if status == _kernels.DIVERGED:
            raise DivergenceDetected(f"fixed-point iterate exceeded 1e30 at s={s} m={m}")
        if status != _kernels.CONVERGED and converged:
            log.warning("inner loop did not converge at s=%g m=%g (row-sum error %.2e)", s, m, worst)
            converged = False
        F, D, C = _kernels.finish(la_t, la_a, q, ws.px, ws.channel, ws.actions, qa, wlogq,
                                  ws.dexp, cost, s, m, ptx)
        if trace is not None:
            trace.append(eval_F(ptx, qty, qa, scenario, s, m, ws))
            qty_prev = qty.copy()
        if abs(F_prev - F) < params.outer_tol:
            break
        F_prev = F
    else:
        converged = False
        log.warning("outer loop hit %d iterations at s=%g m=%g", params.max_outer, s, m)
    D, C = expected_distortion_cost(ptx, ws)
    R = rate_of(ptx, ws)
    return RdcPoint(s, m, R, D, C, converged, it, F=R - s * D - m * C,
                    ptx=ptx if keep_ptx else None)
