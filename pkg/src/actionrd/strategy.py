"""Shannon strategies: a reconstruction map y -> x_hat bundled with an action."""
from __future__ import annotations

import itertools
import math
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import SizeLimitExceeded

log = logging.getLogger(__name__)

DEFAULT_CAP = 10**6


@dataclass(frozen=True)
class ShannonStrategy:
    recon: tuple  # one reconstruction index per y
    action: int

    def apply(self, y: int) -> int:
        return self.recon[y]

    def action_of(self) -> int:
        return self.action


@dataclass(frozen=True, eq=False)
class StrategySpace:
    """All strategies as two integer arrays, ordered by (action, recon).

    ``recon[t, y]`` is the reconstruction index t(y) and ``actions[t]`` is
    a(t). Strategies of one action occupy a contiguous block, so
    ``blocks[a]`` is a slice into the strategy axis.
    """

    recon: np.ndarray
    actions: np.ndarray
    n_xhat: int
    n_actions: int
    blocks: tuple = field(repr=False)

    def __len__(self):
        return len(self.actions)

    def __getitem__(self, t) -> ShannonStrategy:
        return ShannonStrategy(tuple(int(v) for v in self.recon[t]), int(self.actions[t]))

    def apply(self, t: int, y: int) -> int:
        return int(self.recon[t, y])

    def action_of(self, t: int) -> int:
        return int(self.actions[t])

    def members(self, a: int) -> np.ndarray:
        """Indices of T^a."""
        return np.arange(len(self))[self.blocks[a]]

    def index(self, strategy: ShannonStrategy) -> int:
        hits = np.flatnonzero((self.actions == strategy.action)
                              & np.all(self.recon == np.asarray(strategy.recon), axis=1))
        if len(hits) == 0:
            raise KeyError(strategy)
        return int(hits[0])


def _blocks(actions, n_actions):
    out = []
    for a in range(n_actions):
        idx = np.flatnonzero(actions == a)
        out.append(slice(int(idx[0]), int(idx[-1]) + 1) if len(idx) else slice(0, 0))
    return tuple(out)


def enumerate_strategies(n_xhat: int, n_y: int, n_actions: int, *, cap: int = DEFAULT_CAP,
                         reachable=None, choices=None) -> StrategySpace:
    """Every strategy in X_hat^|Y| x A, in lexicographic (action, recon) order.

    ``reachable`` is an optional boolean ``[a, y]`` table. When given, t(y) is
    pinned to reconstruction 0 wherever y cannot occur under a(t), which drops
    strategies that differ only on impossible side information.
    ``choices[a][y]`` lists the reconstructions t(y) may take under action a
    and overrides ``reachable``. The default keeps the full product space.
    """
    if min(n_xhat, n_y, n_actions) < 1:
        raise ValueError("alphabets must be non-empty")
    if choices is None:
        if reachable is None:
            choices = [[range(n_xhat)] * n_y] * n_actions
        else:
            reachable = np.asarray(reachable, dtype=bool)
            choices = [[range(n_xhat) if reachable[a, y] else (0,) for y in range(n_y)]
                       for a in range(n_actions)]
    choices = [[tuple(int(v) for v in c) for c in row] for row in choices]
    if len(choices) != n_actions or any(len(row) != n_y for row in choices):
        raise ValueError("choices must be indexed [action][y]")
    if any(not c or min(c) < 0 or max(c) >= n_xhat for row in choices for c in row):
        raise ValueError("each choice list must be a non-empty subset of the reconstructions")
    count = sum(math.prod(len(c) for c in row) for row in choices)
    if count > cap:
        raise SizeLimitExceeded(f"{count} strategies exceed the cap of {cap}")

    recons, acts = [], []
    for a, row in enumerate(choices):
        block = np.array(list(itertools.product(*row)), dtype=np.int64).reshape(-1, n_y)
        recons.append(block)
        acts.append(np.full(len(block), a, dtype=np.int64))
    recon = np.concatenate(recons)
    actions = np.concatenate(acts)
    recon.setflags(write=False)
    actions.setflags(write=False)
    return StrategySpace(recon, actions, n_xhat, n_actions, _blocks(actions, n_actions))


def support_report(space: StrategySpace, p_t, n_x: int, threshold: float = 1e-6) -> int:
    """Count strategies with mass above ``threshold``; warn past |X||A|+2."""
    size = int(np.sum(np.asarray(p_t) > threshold))
    bound = n_x * space.n_actions + 2
    if size > bound:
        log.warning("strategy support %d exceeds the cardinality bound %d", size, bound)
    return size
