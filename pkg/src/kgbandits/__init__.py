"""Knowledge-gradient and Gittins-index policies for exponential-family
multi-armed bandits, with Monte-Carlo and exact evaluators."""

from .errors import ConfigError, DomainError, MonotonicityError, NumericError
from .families import (
    ArmBelief,
    RewardFamily,
    TruthParam,
    bernoulli,
    excess_expectation,
    exponential,
    gaussian,
    posterior_update,
    predictive_mean,
    sample_reward,
    sample_truth,
    shortfall_expectation,
    true_mean,
)
from .policies import (
    HorizonSpec,
    InfoState,
    PolicyScore,
    fh_discount,
    greedy_action,
    horizon_multiplier,
    kg_action,
    kg_score,
    nkg_action,
    pkg_action,
    thompson_action,
)
from .indices import (
    StoppingQuery,
    gaussian_gi_bonus,
    gibl_index,
    gicg_index,
    gittins_index,
    kg_stopping_value,
    kgi_closed_form_bernoulli,
    kgi_index,
)
from .dominance import (
    RLBQuery,
    Witness,
    dominated_witness,
    dominates,
    index_consistency_probe,
    kg_zero_condition,
    over_exploration_check,
    replay_witness,
    rlb,
)
from .correlated import (
    MvBelief,
    ckg_action,
    ckg_score,
    ikg_action,
    mv_update,
    power_exp_covariance,
    sample_truth_mv,
)
from .simulate import RunConfig, RunResult, percentage_lost, simulate, truncation_horizon
from .exact import exact_value_bernoulli_k2, greedy_loss_percent
from .tables import IndexTable, load_index_table, save_index_table

__version__ = "0.1.0"
