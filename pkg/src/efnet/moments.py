"""Restriction operators: first, second and third spatial moments of a configuration.

Pair counts are over ordered adjacent node pairs, with the two orders of a mixed pair
aggregated under one label, so each undirected edge contributes 2 to exactly one of
the six counts.  Densities divide by ``l_pairs``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numba
import numpy as np

from .graph import Network

PAIR_LABELS = ("SS", "SI", "SR", "II", "IR", "RR")
STATE_LETTERS = "SIR"

# PAIR_INDEX[a][b] for state codes a, b in 1..3
PAIR_INDEX = np.array(
    [[-1, -1, -1, -1],
     [-1, 0, 1, 2],
     [-1, 1, 3, 4],
     [-1, 2, 4, 5]],
    dtype=np.int64,
)


@dataclass(frozen=True)
class CoarseState:
    s: float
    i: float

    def __post_init__(self):
        if self.s < 0 or self.i < 0 or self.s + self.i > 1 + 1e-12:
            raise ValueError(f"({self.s}, {self.i}) is not a valid pair of densities")

    @property
    def r(self) -> float:
        return max(0.0, 1.0 - self.s - self.i)

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.i])

    @classmethod
    def from_array(cls, x) -> "CoarseState":
        return cls(float(x[0]), float(x[1]))


@dataclass(frozen=True)
class PairDensities:
    ss: float
    si: float
    sr: float
    ii: float
    ir: float
    rr: float

    def as_array(self) -> np.ndarray:
        return np.array([self.ss, self.si, self.sr, self.ii, self.ir, self.rr])

    @classmethod
    def from_array(cls, y) -> "PairDensities":
        return cls(*(float(v) for v in y))


@dataclass(frozen=True)
class TripleCounts:
    chain: dict
    loop: dict

    @property
    def chain_total(self) -> int:
        return sum(self.chain.values())

    @property
    def loop_total(self) -> int:
        return sum(self.loop.values())


def mean_densities(cfg: np.ndarray) -> CoarseState:
    n = len(cfg)
    c = np.bincount(cfg, minlength=4)
    return CoarseState(c[1] / n, c[2] / n)


@numba.njit(cache=True)
def _pair_counts(offsets, neighbors, states, pair_index):
    counts = np.zeros(6, dtype=np.int64)
    for i in range(offsets.shape[0] - 1):
        a = states[i]
        for k in range(offsets[i], offsets[i + 1]):
            counts[pair_index[a, states[neighbors[k]]]] += 1
    return counts


def pair_counts(net: Network, cfg: np.ndarray) -> np.ndarray:
    """Integer ordered-pair counts in ``PAIR_LABELS`` order; every entry is even."""
    if len(cfg) != net.n_nodes:
        raise ValueError("configuration length does not match the network")
    return _pair_counts(net.offsets, net.neighbors, cfg, PAIR_INDEX)


def pair_densities(net: Network, cfg: np.ndarray) -> PairDensities:
    return PairDensities.from_array(pair_counts(net, cfg) / net.l_pairs)


@numba.njit(cache=True)
def _is_adjacent(offsets, neighbors, u, v):
    lo = offsets[u]
    hi = offsets[u + 1]
    # neighbor lists are sorted
    while lo < hi:
        mid = (lo + hi) // 2
        w = neighbors[mid]
        if w == v:
            return True
        if w < v:
            lo = mid + 1
        else:
            hi = mid
    return False


@numba.njit(cache=True)
def _triple_counts(offsets, neighbors, states):
    chain = np.zeros((4, 4, 4), dtype=np.int64)
    loop = np.zeros((4, 4, 4), dtype=np.int64)
    for j in range(offsets.shape[0] - 1):
        b = states[j]
        for p in range(offsets[j], offsets[j + 1]):
            i = neighbors[p]
            for q in range(offsets[j], offsets[j + 1]):
                if p == q:
                    continue
                k = neighbors[q]
                if _is_adjacent(offsets, neighbors, i, k):
                    loop[states[i], b, states[k]] += 1
                else:
                    chain[states[i], b, states[k]] += 1
    return chain, loop


def triple_counts(net: Network, cfg: np.ndarray) -> TripleCounts:
    """Ordered open (chain) and closed (loop) triples keyed by state strings like ``"SIR"``.

    A triple on a triangle is counted only as a loop.
    """
    if len(cfg) != net.n_nodes:
        raise ValueError("configuration length does not match the network")
    chain, loop = _triple_counts(net.offsets, net.neighbors, cfg)
    keys = list(product((1, 2, 3), repeat=3))

    def label(t):
        return "".join(STATE_LETTERS[s - 1] for s in t)

    return TripleCounts(
        chain={label(t): int(chain[t]) for t in keys if chain[t]},
        loop={label(t): int(loop[t]) for t in keys if loop[t]},
    )


def pair_target(x: CoarseState, si: float) -> np.ndarray:
    """A six-entry pair-density target with a prescribed ``[SI]``.

    ``[SR]`` and ``[IR]`` take their well-mixed values; ``[SS]``, ``[II]`` and ``[RR]``
    then follow from the marginal identities of a regular graph
    (``[AA] + sum over B != A of [AB] / 2 = [A]``).  Entries are clipped at zero, so
    targets beyond the feasible range are only approximately consistent.
    """
    s, i, r = x.s, x.i, x.r
    sr, ir = 2 * s * r, 2 * i * r
    y = np.array([s - (si + sr) / 2, si, sr, i - (si + ir) / 2, ir, r - (sr + ir) / 2])
    y = np.clip(y, 0.0, None)
    return y / y.sum()
