"""LDGM codes over non-binary, non-uniform alphabets.

Message bits feed sparse XOR checks; checks are read ``d`` at a time and a
pattern table ``phi`` maps each ``d``-bit pattern to a symbol, so a symbol
that owns ``nu_a`` of the ``2**d`` patterns appears with frequency close to
``nu_a / 2**d``. Encoding runs sum-product with decimation on the factor
graph bits -> checks -> symbol factors, where each symbol factor weights the
patterns by the desired conditional of the symbol given the source letter.

Also here: random binning by seeded permutation and maximum-likelihood
Wyner-Ziv decoding inside a bin for enumerable codebooks.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import DecodingAmbiguity, ProfileInfeasible, ToleranceUnachievable

log = logging.getLogger(__name__)

LLR_CLIP = 30.0
TANH_CLIP = 1.0 - 1e-12
TIE_TOL = 1e-9


# ---------------------------------------------------------------- mapping

@dataclass(frozen=True, eq=False)
class SymbolMapping:
    """Pattern table: ``phi[p]`` is the symbol for pattern p (MSB = first check)."""

    d: int
    nu: tuple
    phi: np.ndarray = field(repr=False)

    @property
    def n_patterns(self):
        return 1 << self.d

    def pmf(self):
        return np.asarray(self.nu, dtype=float) / self.n_patterns

    def error(self, pa) -> float:
        return float(np.max(np.abs(np.asarray(pa, dtype=float) - self.pmf())))


def _mapping(d, nu):
    phi = np.repeat(np.arange(len(nu)), nu).astype(np.int64)
    phi.setflags(write=False)
    return SymbolMapping(d, tuple(int(v) for v in nu), phi)


def _round_counts(pa, total):
    raw = np.asarray(pa, dtype=float) * total
    nu = np.rint(raw).astype(np.int64)
    while nu.sum() > total:
        cand = np.flatnonzero(nu > 0)
        nu[cand[np.argmin((raw - nu)[cand])]] -= 1
    while nu.sum() < total:
        nu[np.argmax(raw - nu)] += 1
    return nu


def select_mapping(pa, d_max: int = 12, tol: float = 0.02) -> SymbolMapping:
    """Smallest d whose rounded counts nu_a approximate ``pa`` within ``tol``.

    Patterns are handed out in lexicographic order: the first ``nu_0`` go to
    symbol 0, the next ``nu_1`` to symbol 1, and so on.
    """
    pa = np.asarray(pa, dtype=float)
    if pa.ndim != 1 or np.any(pa < 0) or abs(pa.sum() - 1) > 1e-9:
        raise ValueError("pa must be a pmf")
    for d in range(0, d_max + 1):
        nu = _round_counts(pa, 1 << d)
        if np.max(np.abs(pa - nu / (1 << d))) <= tol + 1e-15:
            return _mapping(d, nu)
    raise ToleranceUnachievable(f"no d <= {d_max} approximates {pa} within {tol}")


def identity_mapping(d: int) -> SymbolMapping:
    """Every pattern is its own symbol (uniform alphabet of size 2**d)."""
    return _mapping(d, np.ones(1 << d, dtype=np.int64))


# ---------------------------------------------------------------- profiles

@dataclass(frozen=True)
class DegreeProfile:
    """Edge-perspective degree distribution for one side of the graph.

    File format, one entry per line (``#`` starts a comment)::

        side check        # or: side message
        2 0.30            # degree, fraction of edges on nodes of that degree
        3 0.70

    The other side of the graph gets degrees as equal as possible.
    """

    degrees: tuple
    fractions: tuple
    side: str = "check"

    def __post_init__(self):
        if self.side not in ("check", "message"):
            raise ProfileInfeasible("side must be 'check' or 'message'")
        if not self.degrees or len(self.degrees) != len(self.fractions):
            raise ProfileInfeasible("profile needs matching degrees and fractions")
        if any(int(g) != g or g < 1 for g in self.degrees):
            raise ProfileInfeasible("degrees must be positive integers")
        f = np.asarray(self.fractions, dtype=float)
        if np.any(f < 0) or abs(f.sum() - 1.0) > 1e-6:
            raise ProfileInfeasible("edge fractions must be >= 0 and sum to 1")

    @classmethod
    def regular(cls, degree: int, side: str = "message"):
        return cls((int(degree),), (1.0,), side)

    @classmethod
    def parse(cls, text: str):
        side, degs, fracs = "check", [], []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "side" and len(parts) == 2:
                side = parts[1]
                continue
            if len(parts) != 2:
                raise ProfileInfeasible(f"line {lineno}: expected 'degree fraction'")
            try:
                degs.append(int(parts[0]))
                fracs.append(float(parts[1]))
            except ValueError as exc:
                raise ProfileInfeasible(f"line {lineno}: {exc}") from exc
        return cls(tuple(degs), tuple(fracs), side)

    @classmethod
    def load(cls, path):
        return cls.parse(Path(path).read_text())

    @classmethod
    def default(cls):
        return cls.parse(resources.files("actionrd").joinpath("data/default_profile.txt").read_text())

    def node_degrees(self, count: int) -> np.ndarray:
        """Degrees for ``count`` nodes matching the edge fractions as closely as
        integer counts allow; deterministic, highest degrees first."""
        deg = np.asarray(self.degrees, dtype=float)
        node_frac = np.asarray(self.fractions) / deg
        node_frac /= node_frac.sum()
        counts = _round_counts(node_frac, count)
        return np.repeat(np.asarray(self.degrees, dtype=np.int64), counts)[::-1].copy()

    def mean_degree(self) -> float:
        """Average node degree implied by the edge fractions."""
        return 1.0 / float(np.sum(np.asarray(self.fractions) / np.asarray(self.degrees)))


def _even_degrees(total, count):
    base, extra = divmod(total, count)
    deg = np.full(count, base, dtype=np.int64)
    deg[:extra] += 1
    return deg


# ---------------------------------------------------------------- graph

@dataclass(frozen=True, eq=False)
class LdgmGraph:
    """Bipartite graph between k message bits and n*d checks.

    Check c = l*d + kappa is the kappa-th check of symbol position l. Edges are
    stored check-major: the bits of check c are ``chk_bits[chk_ptr[c]:chk_ptr[c+1]]``
    (sorted), and ``bit_edges[bit_ptr[j]:bit_ptr[j+1]]`` lists the edge ids of bit j.
    """

    k: int
    n: int
    d: int
    chk_ptr: np.ndarray = field(repr=False)
    chk_bits: np.ndarray = field(repr=False)
    bit_ptr: np.ndarray = field(repr=False)
    bit_edges: np.ndarray = field(repr=False)
    profile: DegreeProfile = None
    seed: int = 0

    @property
    def num_checks(self):
        return self.n * self.d

    @property
    def num_edges(self):
        return len(self.chk_bits)

    def edges(self):
        """(check, bit) pairs in sorted order."""
        chk = np.repeat(np.arange(self.num_checks), np.diff(self.chk_ptr))
        return np.column_stack([chk, self.chk_bits])

    def check_degrees(self):
        return np.diff(self.chk_ptr)

    def bit_degrees(self):
        return np.diff(self.bit_ptr)


def _pair(bit_deg, chk_deg, rng, max_rounds=1000):
    bit_stubs = np.repeat(np.arange(len(bit_deg)), bit_deg)
    chk_stubs = np.repeat(np.arange(len(chk_deg)), chk_deg)
    rng.shuffle(bit_stubs)
    n_bits = max(len(bit_deg), 1)
    for _ in range(max_rounds):
        key = chk_stubs * n_bits + bit_stubs
        order = np.argsort(key, kind="stable")
        dup = order[1:][key[order[1:]] == key[order[:-1]]]
        if len(dup) == 0:
            return chk_stubs, bit_stubs
        # swap each repeated stub with a random partner and try again
        partners = rng.integers(0, len(bit_stubs), size=len(dup))
        bit_stubs[dup], bit_stubs[partners] = bit_stubs[partners], bit_stubs[dup].copy()
    raise ProfileInfeasible("could not remove repeated edges; profile too dense")


def build_graph(k: int, n: int, mapping, degree_profile: DegreeProfile | None = None,
                seed: int = 0) -> LdgmGraph:
    """Sample a graph by configuration-model pairing with repeated-edge rejection.

    ``mapping`` is a SymbolMapping or the integer d. The profile fixes the
    degrees on its side (check degrees are capped at k); the other side gets
    near-equal degrees. Every check
    must end up with at least one bit, and no bit pair may repeat.
    """
    d = mapping if isinstance(mapping, (int, np.integer)) else mapping.d
    if k < 0 or n < 1 or d < 1:
        raise ProfileInfeasible("need k >= 0, n >= 1, d >= 1")
    if k > n * d:
        raise ProfileInfeasible(f"k={k} exceeds the number of checks {n * d}")
    profile = degree_profile or DegreeProfile.default()
    n_chk = n * d
    if k == 0:
        empty = np.zeros(0, dtype=np.int64)
        return LdgmGraph(0, n, d, np.zeros(n_chk + 1, dtype=np.int64), empty,
                         np.zeros(1, dtype=np.int64), empty, profile, seed)
    if profile.side == "check":
        chk_deg = np.minimum(profile.node_degrees(n_chk), k)
        total = int(chk_deg.sum())
        bit_deg = _even_degrees(total, k)
    else:
        bit_deg = profile.node_degrees(k)
        total = int(bit_deg.sum())
        if total < n_chk:
            raise ProfileInfeasible(f"{total} edges cannot cover {n_chk} checks")
        chk_deg = _even_degrees(total, n_chk)
    if np.any(chk_deg > k) or np.any(bit_deg > n_chk):
        raise ProfileInfeasible("a node degree exceeds the size of the other side")
    if np.any(bit_deg < 1):
        raise ProfileInfeasible("fewer edges than message bits: some bits would be unused")
    rng = np.random.default_rng(seed)
    chk, bit = _pair(bit_deg, chk_deg, rng)
    order = np.lexsort((bit, chk))
    chk, bit = chk[order], bit[order]
    chk_ptr = np.zeros(n_chk + 1, dtype=np.int64)
    np.cumsum(np.bincount(chk, minlength=n_chk), out=chk_ptr[1:])
    bit_order = np.argsort(bit, kind="stable")
    bit_ptr = np.zeros(k + 1, dtype=np.int64)
    np.cumsum(np.bincount(bit, minlength=k), out=bit_ptr[1:])
    return LdgmGraph(k, n, d, chk_ptr, bit.astype(np.int64), bit_ptr,
                     bit_order.astype(np.int64), profile, seed)


# ---------------------------------------------------------------- forward map

def forward_checks(bits, graph: LdgmGraph) -> np.ndarray:
    """XOR of each check's message-bit neighbours, length n*d."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape != (graph.k,):
        raise ValueError(f"expected {graph.k} message bits")
    vals = bits[graph.chk_bits]
    sums = np.zeros(graph.num_checks, dtype=np.int64)
    np.add.at(sums, np.repeat(np.arange(graph.num_checks), graph.check_degrees()), vals)
    return sums & 1


def patterns_of(checks, d: int) -> np.ndarray:
    g = np.asarray(checks, dtype=np.int64).reshape(-1, d)
    weights = 1 << np.arange(d - 1, -1, -1)
    return g @ weights


def forward_map(bits, graph: LdgmGraph, mapping: SymbolMapping) -> np.ndarray:
    """Codeword symbols A_l = phi(g_{1,l}, ..., g_{d,l})."""
    if mapping.d != graph.d:
        raise ValueError("mapping and graph disagree on d")
    return mapping.phi[patterns_of(forward_checks(bits, graph), graph.d)]


# ---------------------------------------------------------------- encoder

@dataclass(frozen=True)
class MessagePassingParams:
    """Iteration counts are measured since the last decimation: messages are
    damped once ``damping_start`` iterations pass without one, and after
    ``max_iters`` such iterations the most biased bit is frozen anyway.
    ``damping`` is the weight of the fresh message once damping is on:
    msg = damping * new + (1 - damping) * old. ``budget`` caps the total
    number of iterations of one encode."""

    max_iters: int = 100
    damping_start: int = 30
    damping: float = 0.8
    threshold: float = 2.0
    seed: int = 0
    budget: int = 1000

    def __post_init__(self):
        if not self.damping_start < self.max_iters:
            raise ValueError("damping_start must be below max_iters")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.budget < 1:
            raise ValueError("budget must be positive")


class EncodeResult(NamedTuple):
    bits: np.ndarray
    codeword: np.ndarray
    forced_fraction: float
    frozen_counts: np.ndarray


def symbol_weights(target_sequence, table, mapping: SymbolMapping, padding=None, floor=1e-12):
    """Per-position pattern weights ``[n, 2**d]``.

    ``table[x, a]`` is the desired conditional of symbol a given source letter
    x. Dividing by nu_a undoes the pattern multiplicity, so the codeword prior
    supplies the symbol marginal and the factor supplies the dependence on x.
    Padding positions get uniform weights.
    """
    x = np.asarray(target_sequence, dtype=np.int64)
    tab = np.maximum(np.asarray(table, dtype=float), floor)
    nu = np.maximum(np.asarray(mapping.nu, dtype=float), 1.0)
    w = tab[x][:, mapping.phi] / nu[mapping.phi]
    if padding is not None:
        w[np.asarray(padding, dtype=bool)] = 1.0
    return w / w.sum(axis=1, keepdims=True)


@njit(cache=True)
def _sum_product(chk_ptr, chk_bits, bit_ptr, bit_edges, w, d, max_iters, damping_start,
                 damping, threshold, priority, tie_bits, budget):
    n_chk = len(chk_ptr) - 1
    k = len(bit_ptr) - 1
    n, n_pat = w.shape
    E = len(chk_bits)
    b2c = np.zeros(E)
    c2b = np.zeros(E)
    s2c = np.zeros(n_chk)
    c2s = np.zeros(n_chk)
    total = np.zeros(k)
    frozen = np.zeros(k, dtype=np.int8)   # 0 free, +1 fixed to 0, -1 fixed to 1
    history = np.zeros(budget, dtype=np.int64)
    n_frozen = 0
    stall = 0   # iterations since the last decimation
    p0 = np.empty(d)
    for it in range(budget):
        damp = damping if stall >= damping_start else 1.0
        # symbol factors -> checks
        for l in range(n):
            for kap in range(d):
                v = c2s[l * d + kap]
                if v > LLR_CLIP:
                    v = LLR_CLIP
                elif v < -LLR_CLIP:
                    v = -LLR_CLIP
                p0[kap] = 1.0 / (1.0 + np.exp(-v))
            for kap in range(d):
                m0 = 0.0
                m1 = 0.0
                for p in range(n_pat):
                    prod = w[l, p]
                    for kk in range(d):
                        if kk == kap:
                            continue
                        bit = (p >> (d - 1 - kk)) & 1
                        prod *= p0[kk] if bit == 0 else 1.0 - p0[kk]
                    if (p >> (d - 1 - kap)) & 1:
                        m1 += prod
                    else:
                        m0 += prod
                if m0 < 1e-300:
                    m0 = 1e-300
                if m1 < 1e-300:
                    m1 = 1e-300
                new = np.log(m0 / m1)
                if new > LLR_CLIP:
                    new = LLR_CLIP
                elif new < -LLR_CLIP:
                    new = -LLR_CLIP
                c = l * d + kap
                s2c[c] = damp * new + (1.0 - damp) * s2c[c]
        # checks -> bits and checks -> symbols (tanh rule, leave-one-out)
        for c in range(n_chk):
            lo = chk_ptr[c]
            hi = chk_ptr[c + 1]
            ts = np.tanh(s2c[c] / 2.0)
            prod_all = 1.0
            zeros = 0
            zero_at = -1
            for e in range(lo, hi):
                t = np.tanh(b2c[e] / 2.0)
                if t == 0.0:
                    zeros += 1
                    zero_at = e
                else:
                    prod_all *= t
            # to the symbol factor
            tot = prod_all if zeros == 0 else 0.0
            if tot > TANH_CLIP:
                tot = TANH_CLIP
            elif tot < -TANH_CLIP:
                tot = -TANH_CLIP
            c2s[c] = damp * (2.0 * np.arctanh(tot)) + (1.0 - damp) * c2s[c]
            for e in range(lo, hi):
                if zeros == 0:
                    t = np.tanh(b2c[e] / 2.0)
                    rest = prod_all / t
                elif zeros == 1 and e == zero_at:
                    rest = prod_all
                else:
                    rest = 0.0
                val = ts * rest
                if val > TANH_CLIP:
                    val = TANH_CLIP
                elif val < -TANH_CLIP:
                    val = -TANH_CLIP
                c2b[e] = damp * (2.0 * np.arctanh(val)) + (1.0 - damp) * c2b[e]
        # bits -> checks
        for j in range(k):
            acc = 0.0
            for q in range(bit_ptr[j], bit_ptr[j + 1]):
                acc += c2b[bit_edges[q]]
            total[j] = acc
            for q in range(bit_ptr[j], bit_ptr[j + 1]):
                e = bit_edges[q]
                if frozen[j] != 0:
                    b2c[e] = LLR_CLIP * frozen[j]
                else:
                    v = acc - c2b[e]
                    if v > LLR_CLIP:
                        v = LLR_CLIP
                    elif v < -LLR_CLIP:
                        v = -LLR_CLIP
                    b2c[e] = v
        # decimation
        hit = 0
        best = -1
        best_mag = -1.0
        for j in range(k):
            if frozen[j] != 0:
                continue
            mag = abs(total[j])
            if mag > threshold:
                frozen[j] = 1 if total[j] > 0 else -1
                hit += 1
            elif mag > best_mag or (mag == best_mag and priority[j] > priority[best]):
                best_mag = mag
                best = j
        stall += 1
        if hit == 0 and best >= 0 and stall >= max_iters:
            if total[best] > 0:
                frozen[best] = 1
            elif total[best] < 0:
                frozen[best] = -1
            else:
                frozen[best] = 1 if tie_bits[best] == 0 else -1
            hit = 1
        if hit:
            stall = 0
        n_frozen += hit
        history[it] = n_frozen
        if n_frozen == k:
            break
        # frozen bits now send hard messages
        for j in range(k):
            if frozen[j] != 0:
                for q in range(bit_ptr[j], bit_ptr[j + 1]):
                    b2c[bit_edges[q]] = LLR_CLIP * frozen[j]
    bits = np.zeros(k, dtype=np.int64)
    forced = 0
    for j in range(k):
        if frozen[j] == 1:
            bits[j] = 0
        elif frozen[j] == -1:
            bits[j] = 1
        else:
            forced += 1
            if total[j] > 0:
                bits[j] = 0
            elif total[j] < 0:
                bits[j] = 1
            else:
                bits[j] = tie_bits[j]
    return bits, forced, history, it + 1


def encode_sum_product(target_sequence, target_joint_type, graph: LdgmGraph, mapping: SymbolMapping,
                       params: MessagePassingParams | None = None, padding=None) -> EncodeResult:
    """Find message bits whose codeword is jointly typical with the target.

    ``target_joint_type[x, a]`` weights codeword symbol a at a position whose
    source letter is x (typically the conditional P(a|x)). After each
    iteration every free bit whose LLR magnitude exceeds the threshold is
    frozen; after ``max_iters`` iterations without any, the most biased bit
    is. Bits still free when the budget runs out are set by the sign of
    their LLR; their share is ``forced_fraction``.
    """
    params = params or MessagePassingParams()
    x = np.asarray(target_sequence, dtype=np.int64)
    if x.shape != (graph.n,):
        raise ValueError(f"target sequence must have length {graph.n}")
    if graph.k == 0:
        bits = np.zeros(0, dtype=np.int64)
        return EncodeResult(bits, forward_map(bits, graph, mapping), 0.0, np.zeros(0, dtype=np.int64))
    w = symbol_weights(x, target_joint_type, mapping, padding)
    rng = np.random.default_rng(params.seed)
    priority = rng.random(graph.k)
    tie_bits = rng.integers(0, 2, size=graph.k)
    bits, forced, history, iters = _sum_product(graph.chk_ptr, graph.chk_bits, graph.bit_ptr, graph.bit_edges,
                                         w, graph.d, params.max_iters, params.damping_start,
                                         params.damping, params.threshold, priority, tie_bits, params.budget)
    return EncodeResult(bits, forward_map(bits, graph, mapping), forced / graph.k, history[:iters])


# ---------------------------------------------------------------- binning

def bin_permutation(size: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).permutation(size)


def bin_index(codeword_index, num_bins: int, permutation=None):
    """Bin of a codeword: its (optionally permuted) index modulo num_bins."""
    idx = np.asarray(codeword_index, dtype=np.int64)
    if permutation is not None:
        idx = np.asarray(permutation)[idx]
    return idx % num_bins


def wz_decode(bin_, side_info, codebook, joint_type, labels, *, return_ambiguity=False,
              strict=False):
    """Codeword index in bin ``bin_`` with the highest joint likelihood.

    ``codebook`` is ``[M, n]`` symbol indices, ``labels[m]`` the bin of
    codeword m, ``joint_type[u, y]`` the pmf scoring each (codeword symbol,
    side-information symbol) pair. ``side_info`` may be one sequence (n,) or a
    batch (N, n). Scores within 1e-9 of the best count as ties and go to the
    lowest index; ``strict`` turns a tie into DecodingAmbiguity.
    """
    codebook = np.asarray(codebook, dtype=np.int64)
    cand = np.flatnonzero(np.asarray(labels) == bin_)
    if len(cand) == 0:
        raise ValueError(f"bin {bin_} is empty")
    y = np.asarray(side_info, dtype=np.int64)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    n = codebook.shape[1]
    if y.shape[1] != n:
        raise ValueError("side information length does not match the codebook")
    with np.errstate(divide="ignore"):
        L = np.log(np.asarray(joint_type, dtype=float))
    ny = L.shape[1]
    # score[N, m] = sum_i L[c_mi, y_Ni]: one-hot side info times a gathered table
    G = L[codebook[cand]]                                  # [m, n, |Y|]
    G = np.where(np.isfinite(G), G, -1e300).reshape(len(cand), n * ny).T
    onehot = np.zeros((y.shape[0], n * ny))
    onehot[np.arange(y.shape[0])[:, None], np.arange(n) * ny + y] = 1.0
    score = onehot @ G
    top = score.max(axis=1, keepdims=True)
    near = score >= top - TIE_TOL * np.maximum(1.0, np.abs(top))
    pick = np.argmax(near, axis=1)
    ambiguous = near.sum(axis=1) > 1
    if strict and ambiguous.any():
        raise DecodingAmbiguity(f"{int(ambiguous.sum())} side-information sequences tie in bin {bin_}")
    out = cand[pick]
    if single:
        out, ambiguous = int(out[0]), bool(ambiguous[0])
    return (out, ambiguous) if return_ambiguity else out
