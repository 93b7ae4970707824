"""Network creation games with quality-dependent edge prices."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .game import (EPS, GameKind, Strategy, StrategyProfile, apply_deviation, dumps, loads,
                   private_cost, realize, social_cost)
from .price import (Constant, Linear, Reciprocal, Tabulated, WeightInterval, evaluate,
                    minimize_scaled, minimize_tradeoff, parse_price, validate, x_star)
from .constructions import max_ne, max_opt_star, opt_sum, sum_ne, sum_worst_clique
from .dynamics import (RESTRICTED, CandidateWeights, DeviationFamily, Scheduler, best_response,
                       candidate_weights, improving_response, random_profile, run_dynamics)
from .verifier import (bound_suite, brute_force_opt, certify_ne, enumerate_profiles, poa_report,
                       pos_report)
