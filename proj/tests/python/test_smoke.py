import math

import pytest

import probcal


def test_philox_known_answer():
    assert probcal.philox4x32([0, 0, 0, 0], [0, 0]) == [0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8]


def test_estimators():
    assert probcal.adv_rloo([2.0, 4.0, 6.0]) == pytest.approx([-3.0, 0.0, 3.0])
    assert probcal.adv_grpo([0.0, 1.0], eps=0.0) == pytest.approx([-1.0, 1.0])
    assert probcal.adv_grpo_nostd([0.0, 1.0]) == pytest.approx([-0.5, 0.5])
    assert probcal.adv_ppo([1.0, 2.0, 3.0], 2.0) == pytest.approx([-1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        probcal.adv_rloo([1.0])


def test_true_advantage_two_tokens():
    a = probcal.true_advantage([0.2, 0.8], [0.5, 0.5], 0.7, 1)
    assert a == pytest.approx(0.4 * math.log(2.0))


def test_metrics():
    assert probcal.ece([0.8, 0.8, 0.2, 0.2], [1, 0, 0, 0]) == pytest.approx(0.25)
    assert probcal.auroc([0.8, 0.6, 0.4, 0.2], [1, 0, 1, 0]) == pytest.approx(0.75)
    assert probcal.accuracy([0.4], [1]) == 0.0
    with pytest.raises(probcal.UndefinedMetric):
        probcal.auroc([0.1, 0.2], [1, 1])


def test_world_and_reward():
    rates = probcal.gen_categories(20, 7)
    assert len(rates) == 20 and all(0.0 < r < 1.0 for r in rates)
    assert probcal.reward(0.7, 1, probcal.RewardRule.Brier) == pytest.approx(-0.09)


def test_small_training_run_is_deterministic():
    cfg = probcal.TrainConfig()
    cfg.algo = probcal.Estimator.RLOO
    cfg.group_size = 4
    cfg.prompts_per_rollout = 64
    cfg.steps = 40
    a = probcal.train(cfg, categories=4, train_size=300, eval_size=300)
    b = probcal.train(cfg, categories=4, train_size=300, eval_size=300)
    assert a["policy_json"] == b["policy_json"]
    assert len(a["log"]) == 4
    assert 0.0 <= a["heldout"]["ece"] <= 1.0
    assert len(a["heldout"]["categories"]) == 4


def test_invalid_configuration():
    cfg = probcal.TrainConfig()
    cfg.updates_per_rollout = 10
    with pytest.raises(probcal.InvalidConfiguration):
        cfg.validate()
    cfg.clip_eps = 0.2
    cfg.validate()


def test_bias_curves():
    dist = probcal.discretize_beta(1.0, 1.0)
    assert sum(dist) == pytest.approx(1.0)
    exact = probcal.exact_advantage_curve(1.0, 1.0)
    assert max(range(99), key=exact.__getitem__) == 69
    curve = probcal.empirical_advantage_curve(
        1.0, 1.0, probcal.Estimator.GRPO_NoStd, g=50, n_groups=400, min_count=50
    )
    assert len(curve["token_value"]) == 99
    assert any(m is not None for m in curve["est_mean"])
    s = probcal.sigma_estimates(50.0, 1.0, g=100, n_groups=200)
    assert s["sigma0"] > s["sigma1"]
