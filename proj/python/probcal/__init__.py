"""Tabular policy-gradient calibration testbed."""

from ._probcal import (
    Estimator,
    InvalidConfiguration,
    Readout,
    RewardRule,
    TrainConfig,
    UndefinedMetric,
    accuracy,
    adv_grpo,
    adv_grpo_nostd,
    adv_ppo,
    adv_rloo,
    auroc,
    discretize_beta,
    ece,
    empirical_advantage_curve,
    exact_advantage_curve,
    gen_categories,
    philox4x32,
    reward,
    sigma_estimates,
    train,
    true_advantage,
)

__all__ = [name for name in dir() if not name.startswith("_")]
