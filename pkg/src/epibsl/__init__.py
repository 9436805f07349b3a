"""Episodic bandit social learning: exact per-episode policies, learning
dynamics, failure/regret metrics, and property-based verification."""

from .model import (Action, AggregationFunction, BetaParam, ConstantFunctionError,
                    Instance, ModelError, MonotonicityViolation, PosteriorState,
                    validate_f)
from .solver import (KnownMuSolution, PolicyNode, PolicyShapeError, PolicyTree,
                     SolveResult, all_skip_policy, considers, enumerate_policies,
                     evaluate_under_posterior, evaluate_under_truth,
                     format_policy, solve_known_mu, solve_posterior_optimal)
from .dynamics import (RewardTape, SamplingMode, SimulationRecord, EpisodeRecord,
                       detect_ev1, detect_ev2, ev1_from_bits, ev2_from_bits,
                       run_simulation, sample_mu, stability_threshold)
from .metrics import (BayesRegretCurve, FailureParams, RegretReport,
                      bayes_regret_mc, cost_threshold, count_considering_episodes,
                      detect_fail, detect_strong_fail, n_prior, pseudoregret,
                      ugap, ugap_bound_max, ugap_bound_min)
from .verify import (CheckReport, Violation, check_no_pull_general_f_m2,
                     check_no_pull_m2, check_no_pull_min_max,
                     check_no_pull_symmetric_general_m,
                     check_strong_failure_regret, reproduce_appendix_g)
from .seeding import make_generator, mix64, replicate_seed

__version__ = "0.1.0"
