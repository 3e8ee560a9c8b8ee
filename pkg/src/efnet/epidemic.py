"""Synchronous discrete-time SIRS dynamics on a fixed network.

A configuration is a 1-d ``int8`` array of health states coded 1 (S), 2 (I), 3 (R).

Random draws follow a fixed schedule per step: one uniform per ordered adjacency slot
(``l_pairs`` of them, in CSR order) followed by one uniform per node.  A susceptible
node is infected if any of its infected-neighbor slots draws below ``p_si``, which
realizes one independent Bernoulli trial per infected link.  Infected and recovered
nodes use their node uniform.  Because every node owns its draws regardless of its
state, nearby configurations stay coupled under common random numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import IntEnum

import numba
import numpy as np

from .graph import Network


class HealthState(IntEnum):
    S = 1
    I = 2  # noqa: E741
    R = 3


S, I, R = int(HealthState.S), int(HealthState.I), int(HealthState.R)


@dataclass(frozen=True)
class EpidemicParams:
    p_si: float
    c1: float = 0.1
    c2: float = 0.5
    p_rs: float = 0.2

    def __post_init__(self):
        for name in ("p_si", "p_rs"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("c1 and c2 must be positive")

    def with_p_si(self, p_si: float) -> "EpidemicParams":
        return replace(self, p_si=float(p_si))


def recovery_probability(f: float, c1: float, c2: float) -> float:
    """``1 - exp(-c1 * f**-c2)``, with the limit value 1 at ``f = 0``."""
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"infected-link ratio {f} outside [0, 1]")
    if c1 <= 0 or c2 <= 0:
        raise ValueError("c1 and c2 must be positive")
    if f == 0.0:
        return 1.0
    log_rate = math.log(c1) - c2 * math.log(f)
    if log_rate > 700:  # exp(-rate) underflows anyway
        return 1.0
    return -math.expm1(-math.exp(log_rate))


def infected_link_ratio(net: Network, cfg: np.ndarray, node: int) -> float:
    nb = net.neighbors_of(node)
    return float(np.count_nonzero(cfg[nb] == I)) / len(nb)


def configuration(n_nodes: int, fill: int = S) -> np.ndarray:
    return np.full(n_nodes, fill, dtype=np.int8)


@numba.njit(cache=True)
def _step_kernel(offsets, neighbors, states, link_u, node_u, p_si, c1, c2, p_rs, order):
    out = states.copy()
    for idx in range(order.shape[0]):
        i = order[idx]
        s = states[i]
        lo = offsets[i]
        hi = offsets[i + 1]
        if s == 1:
            for k in range(lo, hi):
                if states[neighbors[k]] == 2 and link_u[k] < p_si:
                    out[i] = 2
                    break
        elif s == 2:
            n_inf = 0
            for k in range(lo, hi):
                if states[neighbors[k]] == 2:
                    n_inf += 1
            if n_inf == 0:
                p = 1.0
            else:
                p = -math.expm1(-c1 * (n_inf / (hi - lo)) ** (-c2))
            if node_u[i] < p:
                out[i] = 3
        else:
            if node_u[i] < p_rs:
                out[i] = 1
    return out


def draw_step_uniforms(net: Network, rng: np.random.Generator):
    """Uniforms for one step: ``(link_u, node_u)``, consumed in ascending order."""
    u = rng.random(net.l_pairs + net.n_nodes)
    return u[:net.l_pairs], u[net.l_pairs:]


def step_with_draws(net, cfg, params: EpidemicParams, link_u, node_u, order=None):
    """One synchronous update with explicit uniforms; ``order`` is the node-visit order."""
    if len(cfg) != net.n_nodes:
        raise ValueError("configuration length does not match the network")
    if order is None:
        order = np.arange(net.n_nodes)
    return _step_kernel(net.offsets, net.neighbors, cfg, link_u, node_u,
                        params.p_si, params.c1, params.c2, params.p_rs,
                        np.asarray(order, dtype=np.int64))


def step(net: Network, cfg: np.ndarray, params: EpidemicParams,
         rng: np.random.Generator) -> np.ndarray:
    link_u, node_u = draw_step_uniforms(net, rng)
    return step_with_draws(net, cfg, params, link_u, node_u)


def evolve(net: Network, cfg: np.ndarray, params: EpidemicParams, n_steps: int,
           rng: np.random.Generator) -> np.ndarray:
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    for _ in range(n_steps):
        cfg = step(net, cfg, params, rng)
    return cfg


def state_counts(cfg: np.ndarray) -> tuple[int, int, int]:
    c = np.bincount(cfg, minlength=4)
    return int(c[S]), int(c[I]), int(c[R])


def simulate_counts(net, cfg, params, n_steps, rng) -> np.ndarray:
    """Run ``n_steps`` steps; returns an ``(n_steps + 1, 3)`` array of S/I/R counts."""
    out = np.empty((n_steps + 1, 3), dtype=np.int64)
    out[0] = state_counts(cfg)
    for t in range(1, n_steps + 1):
        cfg = step(net, cfg, params, rng)
        out[t] = state_counts(cfg)
    return out


def write_trajectory_csv(path, counts: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,S_count,I_count,R_count\n")
        for t, (s, i, r) in enumerate(counts):
            fh.write(f"{t},{s},{i},{r}\n")
