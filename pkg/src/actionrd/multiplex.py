"""End-to-end codes: action code, demultiplexing by action, per-action source
codes with binning, side-information measurement, Wyner-Ziv decoding and
remultiplexing.

A design is derived from a strategy conditional P(t|x). The action code is
an LDGM code whose codewords follow P(a|x); for each action the auxiliary
letter U ranges over the strategies of that action in use, and its source
code is either an LDGM code (when binning cannot help because the side
information says nothing about the source under that action) or an explicit
random codebook with binning for small blocklengths.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import ldgm
from .errors import ConfigError, PaddingOverflow, SizeLimitExceeded
from .prob import entropy

log = logging.getLogger(__name__)

MAX_CODEBOOK = 2**20


def _mi(joint):
    joint = np.asarray(joint, dtype=float)
    tot = joint.sum()
    if tot <= 0:
        return 0.0
    joint = joint / tot
    return max(entropy(joint.sum(axis=1)) + entropy(joint.sum(axis=0)) - entropy(joint), 0.0)


def _cond_mi(joint_xuy):
    """I(X;U|Y) from a joint ``[x, u, y]`` (need not be normalized)."""
    p = joint_xuy / joint_xuy.sum()
    return max(entropy(p.sum(axis=1)) + entropy(p.sum(axis=0)) - entropy(p) - entropy(p.sum(axis=(0, 1))), 0.0)


@dataclass
class Branch:
    """Source code for the positions that take action ``action``.

    ``members`` are the strategy indices forming the U alphabet; ``pux[x, u]``
    is P(u|x, a), ``puy[u, y]`` the joint of U and Y given a, ``recon[u, y]``
    the reconstruction and ``fallback`` the unconditional best guess.
    """

    action: int
    members: np.ndarray
    pux: np.ndarray
    puy: np.ndarray
    recon: np.ndarray
    side_recon: np.ndarray
    fallback: int
    rate_q: float
    rate_wz: float
    n_a: int
    k_a: int
    mode: str
    mapping: ldgm.SymbolMapping | None = None
    codebook_bits: int = 0

    @property
    def num_bins(self):
        return 1 << self.k_a


@dataclass
class CodeDesign:
    scenario: object
    n: int
    eps: float
    pax: np.ndarray
    pa: np.ndarray
    i_xa: float
    k: int
    action_mapping: ldgm.SymbolMapping | None
    branches: list
    profile: ldgm.DegreeProfile | None = None
    mp_params: ldgm.MessagePassingParams = field(default_factory=ldgm.MessagePassingParams)
    target: tuple = (math.nan, math.nan)

    @property
    def rate(self):
        return (self.k + sum(b.k_a for b in self.branches)) / self.n

    @property
    def adaptive(self):
        return self.k > 0

    def instantiate(self, seed: int) -> "Codes":
        """Draw the random graphs and codebooks shared by encoder and decoder."""
        rng = np.random.default_rng(seed)
        seeds = rng.integers(0, 2**31, size=2 + 2 * len(self.branches))
        action_graph = None
        action_seq = None
        if self.k > 0:
            action_graph = ldgm.build_graph(self.k, self.n, self.action_mapping, self.profile, int(seeds[0]))
        else:
            counts = np.floor(self.pa * self.n + 1e-9).astype(int)
            counts[np.argmax(self.pa)] += self.n - counts.sum()
            action_seq = np.random.default_rng(int(seeds[1])).permutation(np.repeat(np.arange(len(self.pa)), counts))
        branch_codes = []
        for i, b in enumerate(self.branches):
            s = int(seeds[2 + 2 * i])
            if b.mode == "ldgm":
                branch_codes.append(ldgm.build_graph(b.k_a, b.n_a, b.mapping, self.profile, s))
            elif b.mode == "codebook":
                pu = b.puy.sum(axis=1)
                book = np.random.default_rng(s).choice(len(pu), size=(1 << b.codebook_bits, b.n_a), p=pu / pu.sum())
                perm = ldgm.bin_permutation(len(book), int(seeds[3 + 2 * i]))
                labels = ldgm.bin_index(np.arange(len(book)), b.num_bins, perm)
                branch_codes.append((book, labels))
            else:
                branch_codes.append(None)
        return Codes(seed, action_graph, action_seq, branch_codes)


@dataclass
class Codes:
    seed: int
    action_graph: ldgm.LdgmGraph | None
    action_sequence: np.ndarray | None
    branch_codes: list


def _branch(scen, ptx, space, a, n, pa_a, eps, mode, tol, d_max, support_tol, codebook_slack, binning):
    members_all = space.members(a)
    px = scen.px
    pxt = px[:, None] * ptx[:, members_all]
    keep = pxt.sum(axis=0) > support_tol
    members = members_all[keep]
    n_a = math.ceil(n * (pa_a + eps))
    ch = scen.channel[a]
    dist = scen.distortion
    pxa = pxt.sum(axis=1)
    fallback = int(np.argmin(pxa @ dist)) if pxa.sum() > 0 else 0
    pxy = pxa[:, None] * ch
    side_recon = np.argmin(pxy.T @ dist, axis=1)  # best guess from y alone
    if len(members) == 0 or pa_a <= 0:
        empty = np.zeros((scen.n_x, 0))
        return Branch(a, members, empty, np.zeros((0, scen.n_y)), np.zeros((0, scen.n_y), dtype=int),
                      side_recon, fallback, 0.0, 0.0, n_a, 0, "none")
    pxu = pxt[:, keep]
    pux = pxu / np.maximum(pxu.sum(axis=1, keepdims=True), 1e-300)
    joint = pxu[:, :, None] * ch[:, None, :]               # [x, u, y]
    puy = joint.sum(axis=0)
    puy = puy / puy.sum()
    rate_q = _mi(pxu)
    rate_wz = _cond_mi(joint)
    # reconstruction: argmin E[d | u, y]; fall back to the strategy's own map
    exp_d = np.einsum("xuy,xz->uyz", joint, dist)
    recon = np.argmin(exp_d, axis=2)
    dead = puy <= 0
    recon[dead] = space.recon[members][dead]
    k_a = math.ceil(n * pa_a * rate_wz - 1e-9)
    if k_a == 0 and (mode == "ldgm" or binning):
        return Branch(a, members, pux, puy, recon, side_recon, fallback, rate_q, rate_wz, n_a, 0, "none")
    mapping = None
    cb_bits = 0
    if mode == "ldgm":
        if rate_q - rate_wz > 1e-6:
            raise ConfigError(f"action {a}: side information helps this branch; use codebook mode")
        mapping = ldgm.select_mapping(puy.sum(axis=1), d_max=d_max, tol=tol)
        if k_a > n_a * mapping.d:
            raise ConfigError(f"action {a}: {k_a} bits exceed the {n_a * mapping.d} checks")
    else:
        cb_bits = max(math.ceil(n * pa_a * rate_q - 1e-9) + codebook_slack, k_a)
        if (1 << cb_bits) > MAX_CODEBOOK:
            raise SizeLimitExceeded(f"action {a}: codebook of 2^{cb_bits} words is not enumerable")
        if not binning:
            k_a = cb_bits
    return Branch(a, members, pux, puy, recon, side_recon, fallback, rate_q, rate_wz, n_a, k_a,
                  mode, mapping, cb_bits)


def design_from_conditional(scenario, ptx, space, n: int, *, eps: float = 0.02, mode: str = "ldgm",
                            profile: ldgm.DegreeProfile | None = None,
                            mp_params: ldgm.MessagePassingParams | None = None,
                            tol: float = 0.02, d_max: int = 8, support_tol: float = 1e-6,
                            codebook_slack: int = 0, binning: bool = True,
                            target=(math.nan, math.nan)) -> CodeDesign:
    """Code parameters for blocklength ``n`` from a strategy conditional ``ptx[x, t]``.

    Message sizes are k = ceil(n I(X;A)) for the action code and
    k_a = ceil(n P_A(a) I(X;U|Y,A=a)) per branch. In codebook mode each
    branch codebook holds 2^(ceil(n P_A(a) I(X;U|A=a)) + codebook_slack)
    words; ``binning=False`` sends the full codeword index instead of a bin.
    """
    if mode not in ("ldgm", "codebook"):
        raise ConfigError("mode must be 'ldgm' or 'codebook'")
    ptx = np.asarray(ptx, dtype=float)
    if ptx.shape != (scenario.n_x, len(space)):
        raise ConfigError(f"conditional has shape {ptx.shape}, expected {(scenario.n_x, len(space))}")
    px = scenario.px
    pax = np.stack([ptx[:, space.blocks[a]].sum(axis=1) for a in range(scenario.n_a)], axis=1)
    pa = px @ pax
    i_xa = _mi(px[:, None] * pax)
    k = math.ceil(n * i_xa - 1e-9)
    mapping = ldgm.select_mapping(pa, d_max=d_max, tol=tol) if k > 0 else None
    if mapping is not None and k > n * mapping.d:
        raise ConfigError("action code rate exceeds the number of checks")
    branches = [_branch(scenario, ptx, space, a, n, pa[a], eps, mode, tol, d_max, support_tol, codebook_slack, binning)
                for a in range(scenario.n_a)]
    return CodeDesign(scenario, n, eps, pax, pa, i_xa, k, mapping, branches, profile,
                      mp_params or ldgm.MessagePassingParams(), target)


def design_for_target(scenario, D: float, C: float, n: int, params=None, **kw) -> CodeDesign:
    """Solve for a conditional meeting (D, C) near R(D, C), then design codes."""
    from .curves import design_conditional

    ptx, ws, _, _ = design_conditional(scenario, D, C, params)
    return design_from_conditional(scenario, ptx, ws.space, n, target=(D, C), **kw)


# ---------------------------------------------------------------- encode / decode

@dataclass
class Message:
    seed: int
    action_bits: np.ndarray
    branch_payload: list      # per action: LDGM bits, a bin index, or None
    k: int
    k_a: tuple

    @property
    def total_bits(self):
        return self.k + sum(self.k_a)


@dataclass
class EncoderState:
    actions: np.ndarray
    positions: list
    codewords: list
    padding_fraction: float
    forced_fraction: float


class SideInfoOracle:
    """Measures Y_i ~ P(y | x_i, a_i) independently per position."""

    def __init__(self, channel, source, seed: int):
        self.channel = np.asarray(channel, dtype=float)
        self.source = np.asarray(source, dtype=np.int64)
        self.rng = np.random.default_rng(seed)

    def measure(self, actions) -> np.ndarray:
        actions = np.asarray(actions, dtype=np.int64)
        rows = self.channel[actions, self.source]            # [n, |Y|]
        u = self.rng.random(len(actions))
        y = (rows.cumsum(axis=1) < u[:, None]).sum(axis=1)
        return np.minimum(y, self.channel.shape[2] - 1)


def demux(seq, actions, n_actions):
    """Positions per action, in order; the inverse is ``mux``."""
    return [np.flatnonzero(np.asarray(actions) == a) for a in range(n_actions)]


def mux(parts, positions, n):
    out = np.empty(n, dtype=np.int64)
    for vals, pos in zip(parts, positions):
        out[pos] = vals
    return out


def _ml_index(seq, book, logtab):
    """Codeword maximizing sum_i logtab[seq_i, book[m, i]], lowest index on ties."""
    m, L = book.shape
    nx = logtab.shape[0]
    G = np.where(np.isfinite(logtab), logtab, -1e300).T[book]   # [m, L, |X|]
    onehot = np.zeros(L * nx)
    onehot[np.arange(L) * nx + seq] = 1.0
    score = G.reshape(m, L * nx) @ onehot
    top = score.max()
    return int(np.flatnonzero(score >= top - ldgm.TIE_TOL * max(1.0, abs(top)))[0])


def encode(x, scenario, design: CodeDesign, seed: int, codes: Codes | None = None):
    """Encode a source block; returns (Message, EncoderState)."""
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (design.n,):
        raise ValueError(f"source block must have length {design.n}")
    codes = codes or design.instantiate(seed)
    forced = []
    if design.k > 0:
        res = ldgm.encode_sum_product(x, design.pax, codes.action_graph, design.action_mapping, design.mp_params)
        action_bits, actions = res.bits, res.codeword
        forced.append(res.forced_fraction)
    else:
        action_bits = np.zeros(0, dtype=np.int64)
        actions = codes.action_sequence.copy()
    positions = demux(x, actions, scenario.n_a)
    payload, words, pad = [], [], 0
    for b, code, pos in zip(design.branches, codes.branch_codes, positions):
        count = len(pos)
        if count > b.n_a:
            raise PaddingOverflow(f"action {b.action}: {count} positions exceed n_a={b.n_a}")
        pad += b.n_a - count
        if b.mode == "none":
            payload.append(None)
            words.append(None)
            continue
        xs = np.zeros(b.n_a, dtype=np.int64)
        xs[:count] = x[pos]
        if b.mode == "ldgm":
            mask = np.arange(b.n_a) >= count
            res = ldgm.encode_sum_product(xs, b.pux, code, b.mapping, design.mp_params, padding=mask)
            payload.append(res.bits)
            words.append(res.codeword[:count])
            forced.append(res.forced_fraction)
        else:
            book, labels = code
            with np.errstate(divide="ignore"):
                logtab = np.log(scenario.px[:, None] * b.pux)
            idx = _ml_index(xs[:count], book[:, :count], logtab)
            payload.append(int(labels[idx]))
            words.append(book[idx, :count])
    msg = Message(codes.seed, action_bits, payload, design.k, tuple(b.k_a for b in design.branches))
    state = EncoderState(actions, positions, words, pad / sum(b.n_a for b in design.branches),
                         float(np.mean(forced)) if forced else 0.0)
    return msg, state


def decode(message: Message, side_oracle: SideInfoOracle, design: CodeDesign, codes: Codes | None = None):
    """Reconstruct the source block; returns (xhat, actions, failures)."""
    codes = codes or design.instantiate(message.seed)
    if design.k > 0:
        actions = ldgm.forward_map(message.action_bits, codes.action_graph, design.action_mapping)
    else:
        actions = codes.action_sequence.copy()
    y = side_oracle.measure(actions)
    positions = demux(y, actions, len(design.branches))
    parts, failures = [], 0
    for b, code, pos, pl in zip(design.branches, codes.branch_codes, positions, message.branch_payload):
        ys = y[pos]
        count = len(pos)
        if b.mode == "none":
            parts.append(b.side_recon[ys])
            continue
        if b.mode == "ldgm":
            u = ldgm.forward_map(pl, code, b.mapping)[:count]
        else:
            book, labels = code
            idx = ldgm.wz_decode(pl, ys, book[:, :count], b.puy, labels)
            u = book[idx, :count]
        bad = b.puy[u, ys] <= 0
        xh = b.recon[u, ys]
        if bad.any():
            failures += int(bad.sum())
            xh = np.where(bad, b.fallback, xh)
        parts.append(xh)
    return mux(parts, positions, len(y)), actions, failures


# ---------------------------------------------------------------- evaluation

@dataclass
class TrialReport:
    trial: int
    n: int
    rate: float
    distortion: float
    cost: float
    padding_fraction: float
    failures: int
    action_tv: float = math.nan
    forced_fraction: float = 0.0


@dataclass
class AggregateReport:
    trials: list
    rate: float
    distortion: float
    cost: float
    distortion_hw: float
    cost_hw: float
    failed_trials: int
    action_tv: float
    padding_fraction: float
    failures: int

    def rows(self):
        cols = ("trial", "n", "rate", "distortion", "cost", "padding_fraction", "failures")
        out = [tuple(getattr(t, c) for c in cols) for t in self.trials]
        n = self.trials[0].n if self.trials else 0
        out.append(("mean", n, self.rate, self.distortion, self.cost, self.padding_fraction, self.failures))
        return cols, out

    def to_csv(self, header_lines=()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        cols, rows = self.rows()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([f"{v:.10g}" if isinstance(v, float) else v for v in r])
        return buf.getvalue()


def run_trial(scenario, design: CodeDesign, trial: int, seed: int) -> TrialReport:
    ss = np.random.SeedSequence([seed, trial]).generate_state(3)
    rng = np.random.default_rng(int(ss[0]))
    x = rng.choice(scenario.n_x, size=design.n, p=scenario.px)
    codes = design.instantiate(int(ss[1]))
    msg, state = encode(x, scenario, design, int(ss[1]), codes)
    oracle = SideInfoOracle(scenario.channel, x, int(ss[2]))
    xhat, actions, failures = decode(msg, oracle, design, codes)
    if not np.array_equal(actions, state.actions):
        raise AssertionError("decoder derived a different action sequence")
    dist = float(np.mean(scenario.distortion[x, xhat]))
    cost = float(np.mean(scenario.cost[actions]))
    emp = np.bincount(actions, minlength=scenario.n_a) / design.n
    tv = 0.5 * float(np.abs(emp - design.pa).sum())
    return TrialReport(trial, design.n, msg.total_bits / design.n, dist, cost, state.padding_fraction,
                       failures, tv, state.forced_fraction)


def evaluate(scenario, design: CodeDesign, n: int | None = None, trials: int = 10, seed: int = 0) -> AggregateReport:
    """Average rate, distortion and cost over independent trials.

    Each trial draws a fresh source block, fresh codes and fresh side
    information. Trials that overflow a padded branch are counted and left
    out of the averages. Half-widths are 95% normal-approximation intervals.
    """
    if n is not None and n != design.n:
        raise ConfigError("design blocklength differs from n; redesign for this n")
    if design.n < 100:
        log.warning("blocklength %d is below the usual minimum of 100", design.n)
    reports, failed = [], 0
    for t in range(trials):
        try:
            reports.append(run_trial(scenario, design, t, seed))
        except PaddingOverflow as exc:
            log.warning("trial %d discarded: %s", t, exc)
            failed += 1
    if not reports:
        raise PaddingOverflow("every trial overflowed its padding")
    D = np.array([r.distortion for r in reports])
    C = np.array([r.cost for r in reports])

    def hw(v):
        return 1.96 * float(np.std(v, ddof=1)) / math.sqrt(len(v)) if len(v) > 1 else 0.0

    return AggregateReport(reports, float(np.mean([r.rate for r in reports])), float(D.mean()), float(C.mean()),
                           hw(D), hw(C), failed, float(np.mean([r.action_tv for r in reports])),
                           float(np.mean([r.padding_fraction for r in reports])),
                           int(sum(r.failures for r in reports)))


def converse_check(report: AggregateReport, curve, width: float = 3.0):
    """Rate must not beat R(D, C) beyond ``width`` half-widths of (D, C).

    Returns (ok, bound) with the bound evaluated at the optimistic corner
    (D + width*hw_D, C + width*hw_C), where R is smallest.
    """
    from .curves import evaluate_rdc

    bound = evaluate_rdc(curve, report.distortion + width * report.distortion_hw,
                         report.cost + width * report.cost_hw)
    return report.rate >= bound - 1e-12, bound


def nonadaptive_design_for_target(scenario, D: float, C: float, n: int, params=None, **kw) -> CodeDesign:
    """Codes whose actions ignore the source (k = 0)."""
    from .curves import nonadaptive_design_conditional

    ptx, ws, _, _ = nonadaptive_design_conditional(scenario, D, C, params)
    return design_from_conditional(scenario, ptx, ws.space, n, target=(D, C), **kw)
