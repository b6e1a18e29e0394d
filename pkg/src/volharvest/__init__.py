"""Volatility harvesting lab: rebalancing analytics, Monte Carlo ensembles, backtests."""

from .analytics import (
    BinomialParams,
    GaussianParams,
    JointBernoulli,
    KellyInputs,
    balanced_modal_value,
    binomial_expected_value,
    fair_game_median,
    imbalanced_modal_value,
    joint_bernoulli,
    kelly_weights,
    log_growth_asset,
    log_growth_balanced,
    modal_ratio,
    optimal_theta,
    outcome_table,
    rebalancing_bonus,
    shannon_growth,
)
from .dynamics import SeedSpec
from .simulation import (
    Balanced,
    Imbalanced,
    InitialBalanced,
    compare_strategies,
    proposition1_experiment,
    run_ensemble,
    shannon_demo,
    summarize,
)

__version__ = "0.1.0"
