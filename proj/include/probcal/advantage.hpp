// Group advantage estimators (PPO, RLOO, GRPO, GRPO without standard
// normalization) and exact advantages for a fixed categorical policy.
#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "probcal/policy.hpp"
#include "probcal/synthetic_env.hpp"

namespace probcal {

enum class Estimator { PPO, RLOO, GRPO, GRPO_NoStd };

std::string_view to_string(Estimator kind);
/// Accepts "ppo", "rloo", "grpo", "grpo-nostd" (also "grpo_nostd").
Estimator parse_estimator(std::string_view name);

struct EstimatorSpec {
  Estimator kind = Estimator::GRPO;
  double eps = 1e-4;  // GRPO denominator stabilizer; ignored by the others
};

/// r_i - V.
std::vector<double> adv_ppo(std::span<const double> rewards, double value);
/// r_i - mean(r_{j != i}); needs at least two rewards.
std::vector<double> adv_rloo(std::span<const double> rewards);
/// r_i - mean(r).
std::vector<double> adv_grpo_nostd(std::span<const double> rewards);
/// (r_i - mean(r)) / (std(r) + eps), population standard deviation.
std::vector<double> adv_grpo(std::span<const double> rewards, double eps);

/// Dispatches on spec.kind; `value` is only read for PPO.
std::vector<double> group_advantages(const EstimatorSpec& spec, std::span<const double> rewards,
                                     double value = 0.0);

/// Minimum group size the estimator is defined for.
std::size_t min_group_size(Estimator kind);

/// Expected reward of the policy for answer 1 (mu_1) and 0 (mu_0).
struct RewardMeans {
  double mu1 = 0.0;
  double mu0 = 0.0;
};
RewardMeans reward_means(const ProbVocab& vocab, std::span<const double> policy_dist,
                         RewardRule rule);

/// A(q, p_hat) = p (r(p_hat,1) - mu_1) + (1-p) (r(p_hat,0) - mu_0), evaluated
/// exactly from the policy distribution.
double true_advantage(const ProbVocab& vocab, std::span<const double> policy_dist, double p_true,
                      std::size_t token, RewardRule rule);

/// Expectation of the no-std GRPO estimate: ((G-1)/G) * A.
double expected_nostd_advantage(const ProbVocab& vocab, std::span<const double> policy_dist,
                                double p_true, std::size_t token, RewardRule rule,
                                std::size_t g);

/// Throws std::invalid_argument unless dist is a nonnegative vector summing
/// to 1 within tol and matching the vocabulary length.
void check_distribution(std::span<const double> dist, std::size_t expected_size,
                        double tol = 1e-9);

}  // namespace probcal
