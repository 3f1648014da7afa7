"""Online welfare-maximizing resource allocation toolkit."""

from swfalloc.bandit import (BanditState, ExperimentResult, RegretTrace,
                             UtilityModel, forced_exploration_set,
                             policy_welfare, run_bandit, run_experiment, step)
from swfalloc.config import (ConfigError, ExperimentConfig, geometric_weights,
                             linear_weights, load_config, make_weights)
from swfalloc.confseq import (ConfState, LiftedBand, fixed_policy_cs, lift_cs,
                              lift_state)
from swfalloc.inference import (OptimalStopper, PolicyComparison,
                                SequentialTest, TestSpec, compare_policies)
from swfalloc.oracle import (Allocation, interior_multiplier_spread,
                             project_capped_simplex, solve, solve_gini,
                             solve_kolm, solve_reference, solve_wpm)
from swfalloc.welfare import (NEG_INF, Family, WelfareSpec, eval_welfare,
                              lipschitz_bound)

__version__ = "0.1.0"
