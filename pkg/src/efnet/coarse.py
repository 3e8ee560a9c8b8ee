"""The coarse time-T map: lift and heal at ``([S], [I])``, evolve ``T`` steps, restrict.

Every replica of the ensemble draws from its own stream, seeded from
``(base_seed, seed_group, replica)``.  Calls that share a seed group therefore use
common random numbers, which is what makes finite-difference derivatives of the
ensemble mean usable.
"""

from __future__ import annotations

import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .epidemic import EpidemicParams, evolve
from .graph import Network
from .lifting import HealingWarning, HealParams, SAParams, heal
from .moments import CoarseState, mean_densities


@dataclass(frozen=True)
class CoarseConfig:
    horizon_t: int = 4
    ensemble: int = 64
    heal: HealParams = field(default_factory=HealParams)
    # healing re-lifts are small corrections; a cold chain avoids scrambling triples
    sa: SAParams = field(default_factory=lambda: SAParams(temp_init=1e-9))
    base_seed: int = 0

    def __post_init__(self):
        if self.horizon_t < 1:
            raise ValueError("horizon_t must be at least 1")
        if self.ensemble < 1:
            raise ValueError("ensemble must be at least 1")


@dataclass(frozen=True)
class EnsembleStep:
    """Per-replica restricted states after one coarse step."""

    replicas: np.ndarray  # (ensemble, 2) array of ([S], [I])
    heal_failures: int

    @property
    def mean(self) -> np.ndarray:
        # ordered sum, independent of how replicas were scheduled
        return np.add.reduce(self.replicas, axis=0) / len(self.replicas)

    @property
    def stderr(self) -> np.ndarray:
        n = len(self.replicas)
        if n < 2:
            return np.full(2, np.nan)
        return self.replicas.std(axis=0, ddof=1) / np.sqrt(n)


def replica_rng(base_seed: int, seed_group: int, replica: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([base_seed, seed_group, replica]))


def coarse_step_ensemble(net: Network, x: CoarseState, params: EpidemicParams,
                         cc: CoarseConfig, seed_group: int = 0) -> EnsembleStep:
    out = np.empty((cc.ensemble, 2))
    failures = 0
    for k in range(cc.ensemble):
        rng = replica_rng(cc.base_seed, seed_group, k)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", HealingWarning)
            cfg = heal(net, x, params, cc.heal, cc.sa, rng)
        failures += sum(issubclass(w.category, HealingWarning) for w in caught)
        cfg = evolve(net, cfg, params, cc.horizon_t, rng)
        m = mean_densities(cfg)
        out[k] = m.s, m.i
    if failures:
        warnings.warn(
            f"healing reached max_rounds in {failures} of {cc.ensemble} replicas",
            HealingWarning, stacklevel=2)
    return EnsembleStep(out, failures)


def coarse_timestep(net: Network, x: CoarseState, params: EpidemicParams,
                    cc: CoarseConfig, seed_group: int = 0) -> CoarseState:
    """Ensemble-mean restricted state after one coarse step of ``cc.horizon_t`` steps."""
    m = coarse_step_ensemble(net, x, params, cc, seed_group).mean
    return CoarseState(float(m[0]), float(m[1]))


def coarse_trajectory(net: Network, x0: CoarseState, params: EpidemicParams,
                      cc: CoarseConfig, n_hops: int) -> list[CoarseState]:
    """``[x0, Phi(x0), Phi(Phi(x0)), ...]``; hop ``k`` uses seed group ``k``."""
    if n_hops < 1:
        raise ValueError("n_hops must be at least 1")
    out = [x0]
    for k in range(n_hops):
        out.append(coarse_timestep(net, out[-1], params, cc, seed_group=k))
    return out


def _to_simplex(x) -> CoarseState:
    s = min(max(float(x[0]), 0.0), 1.0)
    i = min(max(float(x[1]), 0.0), 1.0 - s)
    return CoarseState(s, i)


class EpidemicCoarseMap:
    """Coarse map ``(x, p_si) -> Phi_T(x; p_si)`` over numpy arrays, for the solvers.

    With ``common_random_numbers`` (the default) every evaluation uses seed group 0,
    so the map is a fixed deterministic function of its inputs.  Otherwise each call
    draws a fresh seed group, except inside a :meth:`frozen` block.
    """

    simplex = True

    def __init__(self, net: Network, params: EpidemicParams, cc: CoarseConfig,
                 common_random_numbers: bool = True):
        self.net = net
        self.params = params
        self.cc = cc
        self.common_random_numbers = common_random_numbers
        self.n_evaluations = 0
        self.heal_failures = 0
        self.last_stderr: np.ndarray | None = None
        self._group = 0
        self._frozen = 0

    @contextmanager
    def frozen(self):
        """Evaluations inside the block share one seed group."""
        if not self.common_random_numbers and not self._frozen:
            self._group += 1
        self._frozen += 1
        try:
            yield self
        finally:
            self._frozen -= 1

    def _seed_group(self) -> int:
        if self.common_random_numbers:
            return 0
        if not self._frozen:
            self._group += 1
        return self._group

    def evaluate(self, x, p: float) -> EnsembleStep:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HealingWarning)
            res = coarse_step_ensemble(self.net, _to_simplex(x), self.params.with_p_si(p),
                                       self.cc, self._seed_group())
        self.n_evaluations += 1
        self.heal_failures += res.heal_failures
        self.last_stderr = res.stderr
        return res

    def __call__(self, x, p: float) -> np.ndarray:
        return self.evaluate(x, p).mean
