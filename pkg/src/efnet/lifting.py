"""Lifting: microscopic configurations consistent with prescribed coarse moments.

``random_lift`` fixes the first moment only.  ``sa_lift`` additionally steers the six
pair densities toward a target by simulated annealing over state swaps, which never
change the S/I/R counts.  ``heal`` alternates short simulation bursts with such
constrained re-lifts until the pair densities stop moving, so that a lifted state
starts on the slow manifold.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np

from .epidemic import EpidemicParams, evolve
from .graph import Network
from .moments import PAIR_INDEX, CoarseState, pair_counts, pair_densities


class HealingWarning(RuntimeWarning):
    """Healing stopped at ``max_rounds`` before the pair densities settled."""


@dataclass(frozen=True)
class SAParams:
    temp_init: float | None = None  # None: 1 / l_pairs, one pair-count step of the objective
    cooling: float = 0.95
    sweeps_max: int = 200
    moves_per_sweep: int | None = None  # None: one sweep proposes n_nodes swaps
    tol: float = 1e-4
    patience: int = 2  # stop after this many sweeps without a new best...
    patience_moves: int = 500  # ...spanning at least this many proposals (small graphs)

    def __post_init__(self):
        if self.temp_init is not None and self.temp_init <= 0:
            raise ValueError("temp_init must be positive")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling must lie in (0, 1)")
        if self.sweeps_max < 1:
            raise ValueError("sweeps_max must be positive")
        if self.moves_per_sweep is not None and self.moves_per_sweep < 1:
            raise ValueError("moves_per_sweep must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.patience < 1 or self.patience_moves < 0:
            raise ValueError("patience must be positive")


@dataclass(frozen=True)
class HealParams:
    dt: int = 1
    max_rounds: int = 10
    moment_tol: float = 5e-4

    def __post_init__(self):
        if self.dt < 1 or self.max_rounds < 1 or self.moment_tol <= 0:
            raise ValueError(f"invalid healing parameters {self}")


@dataclass(frozen=True)
class SAResult:
    states: np.ndarray
    objective: float
    sweeps: int
    accepted: int
    history: np.ndarray  # running-best objective at the end of every sweep


def state_counts_for(n_nodes: int, x: CoarseState) -> tuple[int, int, int]:
    n_s = int(round(n_nodes * x.s))
    n_i = int(round(n_nodes * x.i))
    n_r = n_nodes - n_s - n_i
    if n_r < 0:
        raise ValueError(f"densities {x} round to more than {n_nodes} nodes")
    return n_s, n_i, n_r


def random_lift(net: Network, x: CoarseState, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random placement of ``round(N [S])`` S and ``round(N [I])`` I nodes.

    Positions come from one random permutation filled S first, then I, then R, so two
    lifts with the same seed and slightly different densities differ in few nodes.
    """
    n_s, n_i, _ = state_counts_for(net.n_nodes, x)
    perm = rng.permutation(net.n_nodes)
    cfg = np.full(net.n_nodes, 3, dtype=np.int8)
    cfg[perm[:n_s]] = 1
    cfg[perm[n_s:n_s + n_i]] = 2
    return cfg


def restore_counts(cfg: np.ndarray, x: CoarseState, rng: np.random.Generator) -> np.ndarray:
    """Copy of ``cfg`` with the S/I/R counts of ``x``: randomly chosen nodes of states in
    surplus are reassigned to states in deficit."""
    out = np.array(cfg, dtype=np.int8)
    want = np.array(state_counts_for(len(out), x))
    surplus = np.bincount(out, minlength=4)[1:] - want
    pool = [rng.choice(np.flatnonzero(out == a + 1), surplus[a], replace=False)
            for a in range(3) if surplus[a] > 0]
    if not pool:
        return out
    pool = rng.permutation(np.concatenate(pool))
    k = 0
    for a in range(3):
        if surplus[a] < 0:
            out[pool[k:k - surplus[a]]] = a + 1
            k -= surplus[a]
    return out


def swap_states(cfg: np.ndarray, i: int, j: int) -> np.ndarray:
    n = len(cfg)
    if i == j:
        raise ValueError("cannot swap a node with itself")
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"swap ({i}, {j}) out of range for {n} nodes")
    out = cfg.copy()
    out[i], out[j] = cfg[j], cfg[i]
    return out


def objective(net: Network, cfg: np.ndarray, y_target) -> float:
    y = pair_densities(net, cfg).as_array()
    return float(np.linalg.norm(y - np.asarray(y_target, dtype=float)))


@numba.njit(cache=True)
def _objective(counts, target, l_pairs):
    acc = 0.0
    for k in range(6):
        d = counts[k] / l_pairs - target[k]
        acc += d * d
    return math.sqrt(acc)


@numba.njit(cache=True)
def _anneal_sweep(offsets, neighbors, states, members, where, seg, counts, target,
                  l_pairs, temp, u, tol, log):
    """Propose ``len(u)`` swaps.  ``members`` lists nodes grouped by state, with the
    group of state ``a`` occupying ``members[seg[a - 1]:seg[a]]``.

    Returns ``(current, best, best_mark, n_log, accepted)``; ``best_mark`` is the log
    length at the best state seen in this sweep, or -1 if the sweep did not improve
    on the objective it started from.
    """
    n = states.shape[0]
    cur = _objective(counts, target, l_pairs)
    best = cur
    best_mark = -1
    n_log = 0
    accepted = 0
    new = np.empty(6, dtype=np.int64)
    for m in range(u.shape[0]):
        if cur <= tol:
            break
        i = members[min(int(u[m, 0] * n), n - 1)]
        a = states[i]
        n_other = n - (seg[a] - seg[a - 1])
        if n_other == 0:
            break
        r = min(int(u[m, 1] * n_other), n_other - 1)
        # index into the two groups that are not state a
        if r < seg[a - 1]:
            j = members[r]
        else:
            j = members[r + seg[a] - seg[a - 1]]
        b = states[j]
        for k in range(6):
            new[k] = counts[k]
        for p in range(offsets[i], offsets[i + 1]):
            w = neighbors[p]
            if w != j:
                sw = states[w]
                new[PAIR_INDEX[a, sw]] -= 2
                new[PAIR_INDEX[b, sw]] += 2
        for p in range(offsets[j], offsets[j + 1]):
            w = neighbors[p]
            if w != i:
                sw = states[w]
                new[PAIR_INDEX[b, sw]] -= 2
                new[PAIR_INDEX[a, sw]] += 2
        trial = _objective(new, target, l_pairs)
        delta = trial - cur
        if delta <= 0.0 or u[m, 2] < math.exp(-delta / temp):
            states[i] = b
            states[j] = a
            wi = where[i]
            wj = where[j]
            members[wi] = j
            members[wj] = i
            where[i] = wj
            where[j] = wi
            for k in range(6):
                counts[k] = new[k]
            cur = trial
            log[n_log, 0] = i
            log[n_log, 1] = j
            n_log += 1
            accepted += 1
            if cur < best:
                best = cur
                best_mark = n_log
    return cur, best, best_mark, n_log, accepted


@numba.njit(cache=True)
def _replay(states, log, n):
    for m in range(n):
        i = log[m, 0]
        j = log[m, 1]
        t = states[i]
        states[i] = states[j]
        states[j] = t


def anneal(net: Network, init: np.ndarray, y_target, sa: SAParams,
           rng: np.random.Generator) -> SAResult:
    """Simulated annealing over swaps of differing-state node pairs, from ``init``.

    Uphill moves are accepted with probability ``exp(-dO / temp)``; the temperature
    is multiplied by ``sa.cooling`` after every sweep.  Returns the best state seen.
    """
    target = np.asarray(y_target, dtype=float)
    if target.shape != (6,) or abs(target.sum() - 1.0) > 1e-9:
        raise ValueError("pair-density target must have six entries summing to 1")
    n = net.n_nodes
    states = np.array(init, dtype=np.int8)
    order = np.argsort(states, kind="stable")
    members = order.astype(np.int64)
    where = np.empty(n, dtype=np.int64)
    where[members] = np.arange(n)
    seg = np.zeros(4, dtype=np.int64)
    seg[1:] = np.cumsum(np.bincount(states, minlength=4)[1:])
    counts = pair_counts(net, states)
    moves = sa.moves_per_sweep or n
    log = np.empty((moves, 2), dtype=np.int64)

    best_states = states.copy()
    best = _objective(counts, target, net.l_pairs)
    history = []
    temp = sa.temp_init if sa.temp_init is not None else 1.0 / net.l_pairs
    accepted = 0
    sweeps = 0
    stale = 0
    # a single-state configuration admits no swap
    frozen = int(np.diff(seg).max()) == n
    while not frozen and sweeps < sa.sweeps_max and best > sa.tol:
        start = states.copy()
        u = rng.random((moves, 3))
        cur, sweep_best, mark, _, acc = _anneal_sweep(
            net.offsets, net.neighbors, states, members, where, seg, counts, target,
            net.l_pairs, temp, u, sa.tol, log)
        accepted += acc
        sweeps += 1
        if mark >= 0 and sweep_best < best:
            _replay(start, log, mark)
            best_states = start
            best = sweep_best
            stale = 0
        else:
            stale += 1
            if stale >= sa.patience and stale * moves >= sa.patience_moves:
                break
        history.append(best)
        temp *= sa.cooling
    return SAResult(best_states, float(best), sweeps, accepted, np.array(history))


def sa_lift(net: Network, x: CoarseState, y_target, sa: SAParams,
            rng: np.random.Generator, init: np.ndarray | None = None,
            ) -> tuple[np.ndarray, float]:
    """Lift at ``x`` and anneal toward ``y_target``.

    The chain starts from ``random_lift(net, x)`` unless ``init`` is given, in which
    case ``init`` must already carry the S/I/R counts of ``x``.  Infeasible targets
    are not an error: the best configuration found is returned together with its
    (then positive) objective.
    """
    if init is None:
        init = random_lift(net, x, rng)
    elif state_counts_for(net.n_nodes, x) != tuple(np.bincount(init, minlength=4)[1:]):
        raise ValueError("init does not carry the S/I/R counts of x")
    res = anneal(net, init, y_target, sa, rng)
    return res.states, res.objective


def heal(net: Network, x0: CoarseState, params: EpidemicParams, hp: HealParams,
         sa: SAParams, rng: np.random.Generator, init: np.ndarray | None = None,
         ) -> np.ndarray:
    """Constrained runs: evolve ``hp.dt`` steps, record the pair densities, re-lift at
    ``x0`` with those pair densities as target, until two successive recorded pair
    density vectors are within ``hp.moment_tol``.

    Each re-lift starts from the evolved configuration with its counts restored to
    those of ``x0``, so the annealer only corrects the few reassigned nodes.  Used
    with a cold ``sa`` this keeps the triple and higher correlations the dynamics
    built up; a hot chain would scramble them and bias the healed pair densities.

    Emits :class:`HealingWarning` and returns the last iterate if ``hp.max_rounds``
    is reached first.
    """
    cfg = random_lift(net, x0, rng) if init is None else np.array(init, dtype=np.int8)
    prev = None
    for _ in range(hp.max_rounds):
        evolved = evolve(net, cfg, params, hp.dt, rng)
        y = pair_densities(net, evolved).as_array()
        if prev is not None and np.linalg.norm(y - prev) < hp.moment_tol:
            return cfg
        if prev is None and np.array_equal(evolved, cfg):
            return cfg  # frozen dynamics, e.g. the disease-free state
        prev = y
        cfg, _ = sa_lift(net, x0, y, sa, rng, init=restore_counts(evolved, x0, rng))
    warnings.warn(
        f"healing did not converge within {hp.max_rounds} rounds at {x0}",
        HealingWarning, stacklevel=2)
    return cfg
