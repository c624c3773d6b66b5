"""Finite-alphabet probability arithmetic.

Everything is kept in the linear domain and converted to base-2 logs only
when an information measure is evaluated. Entries below ``ZERO_TOL`` count as
exact zeros for support checks, and logs are floored at ``LOG_FLOOR``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import AbsoluteContinuityViolation, AxisMismatch

SUM_TOL = 1e-12
ZERO_TOL = 1e-15
LOG_FLOOR = 1e-300


def safe_log2(p):
    """Elementwise log2 with a floor of 1e-300 so zeros never produce -inf."""
    return np.log2(np.maximum(p, LOG_FLOOR))


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_simplex(probs, axis=None, what="pmf"):
    if np.any(probs < -ZERO_TOL):
        raise ValueError(f"{what} has negative entries")
    tot = probs.sum(axis=axis)
    if not np.all(np.abs(tot - 1.0) <= SUM_TOL):
        raise ValueError(f"{what} does not sum to 1 (max deviation {np.max(np.abs(tot - 1.0)):.3e})")


class Pmf:
    """Probability vector over an ordered alphabet."""

    __slots__ = ("probs", "alphabet")

    def __init__(self, probs, alphabet: Sequence | None = None):
        probs = _frozen(probs)
        if probs.ndim != 1:
            raise ValueError("Pmf must be one-dimensional")
        _check_simplex(probs)
        self.probs = np.clip(probs, 0.0, None)
        self.probs.setflags(write=False)
        self.alphabet = tuple(range(len(probs))) if alphabet is None else tuple(alphabet)
        if len(self.alphabet) != len(probs):
            raise ValueError("alphabet length does not match probs")

    @classmethod
    def normalized(cls, weights, alphabet=None):
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum(), alphabet)

    @classmethod
    def uniform(cls, size, alphabet=None):
        return cls(np.full(size, 1.0 / size), alphabet)

    def __len__(self):
        return len(self.probs)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)

    def __repr__(self):
        return f"Pmf({np.array2string(self.probs, precision=4)})"

    def support(self):
        return np.flatnonzero(self.probs > ZERO_TOL)


class ConditionalPmf:
    """Stochastic matrix; row ``i`` is the pmf conditioned on symbol ``i``."""

    __slots__ = ("rows", "given", "alphabet")

    def __init__(self, rows, given: Sequence | None = None, alphabet: Sequence | None = None):
        rows = _frozen(rows)
        if rows.ndim != 2:
            raise ValueError("ConditionalPmf must be a matrix")
        _check_simplex(rows, axis=1, what="conditional pmf row")
        self.rows = rows
        self.given = tuple(range(rows.shape[0])) if given is None else tuple(given)
        self.alphabet = tuple(range(rows.shape[1])) if alphabet is None else tuple(alphabet)

    def __getitem__(self, i) -> Pmf:
        return Pmf(self.rows[i], self.alphabet)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.rows, dtype=dtype)

    @property
    def shape(self):
        return self.rows.shape


class JointPmf:
    """Joint pmf over a product alphabet with one label per axis."""

    __slots__ = ("probs", "labels")

    def __init__(self, probs, labels: Sequence[str]):
        probs = _frozen(probs)
        labels = tuple(labels)
        if probs.ndim != len(labels):
            raise AxisMismatch(f"{probs.ndim} axes but {len(labels)} labels")
        if len(set(labels)) != len(labels):
            raise AxisMismatch("duplicate axis labels")
        _check_simplex(probs, what="joint pmf")
        self.probs = probs
        self.labels = labels

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)

    def _axes(self, names):
        names = _as_labels(names)
        try:
            return tuple(self.labels.index(n) for n in names)
        except ValueError as exc:
            raise AxisMismatch(f"unknown axis in {names}; have {self.labels}") from exc

    def marginal(self, names) -> "JointPmf":
        """Marginal over the named axes, in the order given."""
        names = _as_labels(names)
        keep = self._axes(names)
        drop = tuple(i for i in range(self.probs.ndim) if i not in keep)
        m = self.probs.sum(axis=drop) if drop else self.probs
        # sum() keeps remaining axes in original order; permute to requested
        remaining = [i for i in range(self.probs.ndim) if i in keep]
        m = np.transpose(m, [remaining.index(i) for i in keep])
        return JointPmf(m, names)

    def entropy(self, names=None) -> float:
        p = self.probs if names is None else self.marginal(names).probs
        return entropy(p)


def _as_labels(names):
    if isinstance(names, str):
        return (names,)
    return tuple(names)


def entropy(p) -> float:
    """Shannon entropy in bits of an array of probabilities (any shape)."""
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > ZERO_TOL]
    return float(-(p * np.log2(p)).sum())


def kl_divergence(p, q) -> float:
    """D(p||q) in bits, with 0 log(0/q) = 0.

    Raises AbsoluteContinuityViolation when p puts mass where q does not.
    """
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise AxisMismatch("p and q live on different alphabets")
    on = p > ZERO_TOL
    if np.any(q[on] <= ZERO_TOL):
        raise AbsoluteContinuityViolation("p(i) > 0 where q(i) = 0")
    val = float((p[on] * (np.log2(p[on]) - np.log2(q[on]))).sum())
    return max(val, 0.0)


def mutual_information(joint: JointPmf, a, b, cond=None) -> float:
    """I(A;B|C) in bits from a labelled joint pmf.

    ``a``, ``b`` and ``cond`` are axis labels or tuples of labels; the groups
    must be disjoint. Axes not mentioned are marginalized out.
    """
    a, b = _as_labels(a), _as_labels(b)
    c = () if cond is None else _as_labels(cond)
    groups = a + b + c
    if len(set(groups)) != len(groups):
        raise AxisMismatch("axis groups overlap")
    joint._axes(groups)
    h = joint.entropy
    if c:
        val = h(a + c) + h(b + c) - h(groups) - h(c)
    else:
        val = h(a) + h(b) - h(a + b)
    return max(val, 0.0)


def build_joint(px, ptx, channel, action_of) -> JointPmf:
    """Joint pmf P(x, y, t) = P(x) P(t|x) P(y|x, a(t)).

    ``ptx`` is indexed ``[x, t]``, ``channel`` is ``[a, x, y]`` and
    ``action_of[t]`` gives the action of strategy ``t``. Axes are labelled
    ``("X", "Y", "T")``.
    """
    px = np.asarray(px, dtype=float)
    ptx = np.asarray(ptx, dtype=float)
    channel = np.asarray(channel, dtype=float)
    action_of = np.asarray(action_of, dtype=int)
    nx, nt = ptx.shape
    if px.shape != (nx,) or channel.shape[1] != nx or action_of.shape != (nt,):
        raise AxisMismatch("inconsistent alphabet sizes")
    w = channel[action_of]  # [t, x, y]
    joint = px[:, None, None] * w.transpose(1, 2, 0) * ptx[:, None, :]
    return JointPmf(joint, ("X", "Y", "T"))
