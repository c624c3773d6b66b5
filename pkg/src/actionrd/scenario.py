"""Problem instances: the generic container, the erasure example and its
closed-form reference curve, and scenario files.

Scenario files are TOML::

    name = "example"
    x = ["0", "1"]            # source alphabet labels
    y = ["0", "1", "e"]       # side-information alphabet labels
    a = ["off", "on"]         # action alphabet labels
    xhat = ["0", "1"]         # optional, defaults to x
    px = [0.5, 0.5]
    cost = [0.0, 1.0]         # one entry per action
    distortion = [[0, 1],     # rows x, columns xhat
                  [1, 0]]

    [channel]                 # one |X| x |Y| table per action label
    off = [[0, 0, 1], [0, 0, 1]]
    on  = [[1, 0, 0], [0, 1, 0]]
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, InfeasibleTarget
from .prob import entropy

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ScenarioInstance:
    """A complete source-coding-with-actions problem.

    Arrays are indexed positionally: ``channel[a, x, y]``,
    ``distortion[x, xhat]`` and ``cost[a]``.
    """

    px: np.ndarray
    channel: np.ndarray
    distortion: np.ndarray
    cost: np.ndarray
    x_labels: tuple = None
    y_labels: tuple = None
    a_labels: tuple = None
    xhat_labels: tuple = None
    name: str = "scenario"
    _hash: str = field(default="", repr=False)

    def __post_init__(self):
        px = np.array(self.px, dtype=float)
        ch = np.array(self.channel, dtype=float)
        dist = np.array(self.distortion, dtype=float)
        cost = np.array(self.cost, dtype=float)
        if ch.ndim != 3:
            raise ConfigError("channel must be indexed [a, x, y]")
        na, nx, ny = ch.shape
        if px.shape != (nx,) or dist.ndim != 2 or dist.shape[0] != nx or cost.shape != (na,):
            raise ConfigError("inconsistent alphabet sizes")
        if np.any(px < 0) or abs(px.sum() - 1) > _TOL:
            raise ConfigError("px is not a pmf")
        if np.any(ch < 0) or np.any(np.abs(ch.sum(axis=2) - 1) > _TOL):
            raise ConfigError("every channel row P(.|x,a) must be a pmf over Y")
        if np.any(dist < 0) or np.any(dist.min(axis=1) > 0):
            raise ConfigError("distortion must be >= 0 with a zero-distortion reconstruction per x")
        if np.any(cost < 0) or cost.min() > 0 or not np.all(np.isfinite(cost)):
            raise ConfigError("cost must be finite, >= 0, and zero for some action")
        for name, arr in (("px", px), ("channel", ch), ("distortion", dist), ("cost", cost)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        defaults = {
            "x_labels": [str(i) for i in range(nx)],
            "y_labels": [str(i) for i in range(ny)],
            "a_labels": [str(i) for i in range(na)],
            "xhat_labels": [str(i) for i in range(dist.shape[1])],
        }
        for key, dflt in defaults.items():
            labels = getattr(self, key)
            labels = tuple(dflt if labels is None else labels)
            if len(labels) != len(dflt):
                raise ConfigError(f"{key} has the wrong length")
            object.__setattr__(self, key, labels)
        digest = hashlib.sha256()
        for arr in (px, ch, dist, cost):
            digest.update(np.ascontiguousarray(arr).tobytes())
        object.__setattr__(self, "_hash", digest.hexdigest()[:16])

    @property
    def n_x(self):
        return len(self.px)

    @property
    def n_y(self):
        return self.channel.shape[2]

    @property
    def n_a(self):
        return self.channel.shape[0]

    @property
    def n_xhat(self):
        return self.distortion.shape[1]

    @property
    def fingerprint(self) -> str:
        return self._hash

    def reachable(self) -> np.ndarray:
        """``[a, y]`` table: can y occur when action a is taken?"""
        return np.einsum("x,axy->ay", self.px, self.channel) > 0

    def recon_choices(self) -> list:
        """``[a][y]`` lists of reconstructions worth keeping.

        Only letters x that can produce y under a matter for t(y). A
        reconstruction whose distortion on those letters is matched or beaten
        by another one is dropped (ties keep the lowest index). Swapping t(y)
        for the better one leaves the rate unchanged and the distortion no
        larger, so the optimum is unaffected.
        """
        out = []
        for a in range(self.n_a):
            row = []
            for y in range(self.n_y):
                d = self.distortion[(self.px > 0) & (self.channel[a, :, y] > 0)]  # [x, xhat]
                keep = []
                for j in range(self.n_xhat):
                    beaten = any(np.all(d[:, i] <= d[:, j]) and (i < j or np.any(d[:, i] < d[:, j]))
                                 for i in range(self.n_xhat) if i != j)
                    if not beaten:
                        keep.append(j)
                row.append(tuple(keep))
            out.append(row)
        return out

    def restrict_action(self, a: int) -> "ScenarioInstance":
        """The single-action scenario that always plays ``a``."""
        return ScenarioInstance(self.px, self.channel[a:a + 1], self.distortion,
                                np.zeros(1), self.x_labels, self.y_labels,
                                (self.a_labels[a],), self.xhat_labels,
                                name=f"{self.name}|a={self.a_labels[a]}")

    def to_toml(self) -> str:
        def row(v):
            return "[" + ", ".join(repr(float(x)) for x in v) + "]"

        def strs(v):
            return "[" + ", ".join(f'"{s}"' for s in v) + "]"

        lines = [f'name = "{self.name}"', f"x = {strs(self.x_labels)}", f"y = {strs(self.y_labels)}",
                 f"a = {strs(self.a_labels)}", f"xhat = {strs(self.xhat_labels)}",
                 f"px = {row(self.px)}", f"cost = {row(self.cost)}",
                 "distortion = [" + ", ".join(row(r) for r in self.distortion) + "]", "", "[channel]"]
        for a, lab in enumerate(self.a_labels):
            lines.append(f'"{lab}" = [' + ", ".join(row(r) for r in self.channel[a]) + "]")
        return "\n".join(lines) + "\n"


def load_scenario(path) -> ScenarioInstance:
    """Read a TOML scenario file (schema in the module docstring)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file {path} does not exist")
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return scenario_from_dict(doc)


def scenario_from_dict(doc: dict) -> ScenarioInstance:
    try:
        x, y, a = doc["x"], doc["y"], doc["a"]
        xhat = doc.get("xhat", x)
        chan = doc["channel"]
        missing = [lab for lab in a if lab not in chan]
        if missing:
            raise ConfigError(f"channel table missing for actions {missing}")
        channel = np.array([chan[lab] for lab in a], dtype=float)
        return ScenarioInstance(np.array(doc["px"], dtype=float), channel,
                                np.array(doc["distortion"], dtype=float),
                                np.array(doc["cost"], dtype=float),
                                tuple(x), tuple(y), tuple(a), tuple(xhat),
                                name=doc.get("name", "scenario"))
    except KeyError as exc:
        raise ConfigError(f"scenario is missing key {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# erasure example

@dataclass(frozen=True)
class ErasureParams:
    K: int = 4
    q: float = 0.5
    p: float = 0.0
    C: float = 0.5

    def __post_init__(self):
        if self.K < 1 or not 0 <= self.q <= 1 or not 0 <= self.p < 1 or not 0 <= self.C <= 1:
            raise ConfigError(f"invalid erasure parameters {self}")


def build_erasure(params: ErasureParams | None = None, **kw) -> ScenarioInstance:
    """K relevant letters plus one irrelevant letter; action 1 opens an
    erasure channel to the decoder, action 0 yields a certain erasure.

    Letters are labelled 1..K+1 and the erasure symbol ``e`` is the last Y.
    """
    params = params or ErasureParams(**kw)
    K, q, p = params.K, params.q, params.p
    nx = K + 1
    px = np.r_[np.full(K, (1 - q) / K), q]
    e = nx
    channel = np.zeros((2, nx, nx + 1))
    channel[0, :, e] = 1.0
    for x in range(nx):
        channel[1, x, x] = 1 - p
        channel[1, x, e] += p
    distortion = np.ones((nx, nx))
    np.fill_diagonal(distortion, 0.0)
    distortion[K, :] = 0.0  # the irrelevant letter is never penalized
    labels = tuple(str(i) for i in range(1, nx + 1))
    return ScenarioInstance(px, channel, distortion, np.array([0.0, 1.0]), labels,
                            labels + ("e",), ("0", "1"), labels,
                            name=f"erasure(K={K},q={q},p={p})")


def _h2(x):
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def kary_hamming_rd(D: float, K: int) -> float:
    """R(D) of a uniform K-ary source under Hamming distortion."""
    if K == 1 or D >= (K - 1) / K:
        return 0.0
    if D <= 0:
        return math.log2(K)
    return math.log2(K) - _h2(D) - D * math.log2(K - 1)


def erasure_classic_rd(D: float, px, K: int) -> float:
    """Classical R(D) for a source whose first K letters are equiprobable
    and Hamming-penalized while the remaining letter is free.

    The free letter can always copy the reproduction marginal, so it costs
    no rate and only the relevant mass w needs coding: R = w R_K(D / w).
    """
    px = np.asarray(px, dtype=float)
    rel = px[:K]
    if not np.allclose(rel, rel[0], atol=1e-12):
        raise ValueError("relevant letters must be equiprobable")
    w = float(rel.sum())
    if w <= 1e-15:
        return 0.0
    return w * kary_hamming_rd(D / w, K)


def erasure_pax(gamma: float, K: int, q: float, C: float) -> np.ndarray:
    """Symmetric P(a|x) with cost budget used fully; rows x, columns a."""
    rel_on = (C - q * gamma) / (1 - q) if q < 1 else 0.0
    pax = np.empty((K + 1, 2))
    pax[:K, 1] = rel_on
    pax[:K, 0] = 1 - rel_on
    pax[K] = (1 - gamma, gamma)
    return pax


def _gamma_range(K, q, C):
    lo = max(0.0, (C - (1 - q)) / q) if q > 0 else 0.0
    hi = min(1.0, C / q) if q > 0 else 0.0
    return lo, hi


def _analytic_objective(gamma, D, C, K, q, classic):
    px = np.r_[np.full(K, (1 - q) / K), q]
    pax = erasure_pax(gamma, K, q, C)
    joint = px[:, None] * pax
    i_xa = entropy(joint.sum(0)) + entropy(px) - entropy(joint)
    p0 = joint[:, 0].sum()
    if p0 <= 1e-15:
        return i_xa if D >= 0 else math.inf
    sub = joint[:, 0] / p0
    return i_xa + p0 * classic(D / p0, sub)


def analytic_rdc(D: float, C: float, K: int = 4, q: float = 0.5, p: float = 0.0, *,
                 step: float = 1e-3, classic=None) -> float:
    """Closed-form R(D, C) of the noiseless (p = 0) erasure example.

    Minimizes over the irrelevant-letter sampling probability gamma on a
    uniform grid, then polishes the best cell by golden-section search.
    ``classic(D, px)`` supplies the classical rate-distortion function of the
    A = 0 sub-source; it defaults to the exact reduction in
    :func:`erasure_classic_rd`.
    """
    if p != 0:
        raise InfeasibleTarget("the analytic reference only holds for p = 0")
    if D < 0 or not 0 <= C <= 1:
        raise InfeasibleTarget(f"(D, C) = ({D}, {C}) out of range")
    if C >= 1:
        return 0.0
    if classic is None:
        def classic(d, sub):
            return erasure_classic_rd(d, sub, K)
    lo, hi = _gamma_range(K, q, C)

    def f(g):
        return _analytic_objective(g, D, C, K, q, classic)

    if hi - lo <= 1e-15:
        return max(f(lo), 0.0)
    grid = np.linspace(lo, hi, max(2, int(round((hi - lo) / step)) + 1))
    vals = np.array([f(g) for g in grid])
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    from scipy.optimize import minimize_scalar
    res = minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": 1e-9})
    best = min(vals[i], res.fun)
    return max(float(best), 0.0)


def analytic_gamma(D: float, C: float, K: int = 4, q: float = 0.5, step: float = 1e-3) -> float:
    """Minimizing gamma for :func:`analytic_rdc` (grid plus polish)."""
    lo, hi = _gamma_range(K, q, C)
    if hi - lo <= 1e-15:
        return lo

    def f(g):
        return _analytic_objective(g, D, C, K, q, lambda d, sub: erasure_classic_rd(d, sub, K))

    grid = np.linspace(lo, hi, max(2, int(round((hi - lo) / step)) + 1))
    vals = np.array([f(g) for g in grid])
    i = int(np.argmin(vals))
    from scipy.optimize import minimize_scalar
    res = minimize_scalar(f, bounds=(grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]),
                          method="bounded", options={"xatol": 1e-9})
    return float(res.x) if res.fun <= vals[i] else float(grid[i])


def classic_scenario(px, distortion) -> ScenarioInstance:
    """No side information, one free action: plain rate-distortion."""
    px = np.asarray(px, dtype=float)
    nx = len(px)
    return ScenarioInstance(px, np.ones((1, nx, 1)), np.asarray(distortion, dtype=float),
                            np.zeros(1), name="classic")


def classic_rd(D: float, px, distortion, params=None) -> float:
    """Classical R(D) computed by the action solver with |A| = |Y| = 1.

    Sweeps the distortion slope and evaluates the lower envelope at D, then
    tightens the envelope with a one-dimensional dual search.
    """
    from .curves import d_max, rd_at

    scen = classic_scenario(px, distortion)
    if D >= d_max(scen, 0.0) - 1e-15:
        return 0.0
    return rd_at(scen, D, 0.0, params=params)
