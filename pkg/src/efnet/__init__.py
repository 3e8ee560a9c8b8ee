"""Equation-free coarse bifurcation analysis of an SIRS epidemic on random regular networks."""

from .coarse import (CoarseConfig, EnsembleStep, EpidemicCoarseMap, coarse_step_ensemble,
                     coarse_timestep, coarse_trajectory)
from .epidemic import (EpidemicParams, HealthState, evolve, recovery_probability,
                       simulate_counts, step)
from .graph import GenerationError, Network, generate_rrn, is_connected, load_network, save_network
from .lifting import (HealingWarning, HealParams, SAParams, heal, random_lift, sa_lift,
                      swap_states)
from .moments import (PAIR_LABELS, CoarseState, PairDensities, TripleCounts, mean_densities,
                      pair_counts, pair_densities, triple_counts)
from .numerics import (Branch, ContinuationConfig, ContinuationPoint, ConvergenceError,
                       FixedPoint, Fold, SingularJacobianError, arclength_step, detect_folds,
                       fd_jacobian, newton_fixed_point, trace_branch)

__version__ = "0.1.0"
