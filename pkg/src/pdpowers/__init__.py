"""Primal-dual policy optimization for finite-horizon linear mixture
constrained MDPs with adversarial rewards, plus exact DP oracles and a
reproducible experiment harness."""

from .core import (CmdpInstance, EpisodeRecord, FeatureMap, PolicyTable,
                   ValueTables, phi_v, phi_v_all, reward_at, transition_prob,
                   validate_instance)
from .environment import (BenchmarkParams, RngStream,
                          build_benchmark_instance, build_tiny_instance,
                          rollout)
from .estimation import (ConfidenceRadii, SpdState, bonus_norm, offset_e,
                         proposition1_check, radii, rank1_update,
                         sigma_bar_sq, variance_estimate)
from .learner import (LearnerConfig, LearnerState, run_pd_powers,
                      run_random_baseline)
from .oracle import (ComparatorResult, DpResult, brute_force_comparator,
                     constrained_comparator, dp_evaluate, lagrangian_greedy,
                     metrics)

__version__ = "0.1.0"
