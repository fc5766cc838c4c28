#include "probcal/advantage.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "probcal/errors.hpp"

namespace probcal {

std::string_view to_string(Estimator kind) {
  switch (kind) {
    case Estimator::PPO: return "ppo";
    case Estimator::RLOO: return "rloo";
    case Estimator::GRPO: return "grpo";
    case Estimator::GRPO_NoStd: return "grpo-nostd";
  }
  return "?";
}

Estimator parse_estimator(std::string_view name) {
  if (name == "ppo") return Estimator::PPO;
  if (name == "rloo") return Estimator::RLOO;
  if (name == "grpo") return Estimator::GRPO;
  if (name == "grpo-nostd" || name == "grpo_nostd") return Estimator::GRPO_NoStd;
  throw std::invalid_argument("unknown estimator: " + std::string(name));
}

namespace {

double mean_of(std::span<const double> r) {
  return std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
}

void require_nonempty(std::span<const double> rewards) {
  if (rewards.empty()) throw std::invalid_argument("advantage estimators need a nonempty group");
}

}  // namespace

std::vector<double> adv_ppo(std::span<const double> rewards, double value) {
  require_nonempty(rewards);
  std::vector<double> out(rewards.begin(), rewards.end());
  for (double& x : out) x -= value;
  return out;
}

std::vector<double> adv_rloo(std::span<const double> rewards) {
  if (rewards.size() < 2)
    throw std::invalid_argument("RLOO needs a group of at least two (leave-one-out baseline)");
  const double total = std::accumulate(rewards.begin(), rewards.end(), 0.0);
  const double others = static_cast<double>(rewards.size() - 1);
  std::vector<double> out(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i)
    out[i] = rewards[i] - (total - rewards[i]) / others;
  return out;
}

std::vector<double> adv_grpo_nostd(std::span<const double> rewards) {
  require_nonempty(rewards);
  const double m = mean_of(rewards);
  std::vector<double> out(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = rewards[i] - m;
  return out;
}

std::vector<double> adv_grpo(std::span<const double> rewards, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("GRPO eps must be nonnegative");
  auto centered = adv_grpo_nostd(rewards);
  double ss = 0.0;
  for (double d : centered) ss += d * d;
  const double sd = std::sqrt(ss / static_cast<double>(centered.size()));
  const double denom = sd + eps;
  // Constant group: the numerator is exactly zero, so is the advantage.
  if (denom == 0.0) return std::vector<double>(centered.size(), 0.0);
  for (double& d : centered) d /= denom;
  return centered;
}

std::vector<double> group_advantages(const EstimatorSpec& spec, std::span<const double> rewards,
                                     double value) {
  switch (spec.kind) {
    case Estimator::PPO: return adv_ppo(rewards, value);
    case Estimator::RLOO: return adv_rloo(rewards);
    case Estimator::GRPO: return adv_grpo(rewards, spec.eps);
    case Estimator::GRPO_NoStd: return adv_grpo_nostd(rewards);
  }
  throw InvalidConfiguration("unknown estimator");
}

std::size_t min_group_size(Estimator kind) {
  return (kind == Estimator::RLOO || kind == Estimator::GRPO) ? 2 : 1;
}

void check_distribution(std::span<const double> dist, std::size_t expected_size, double tol) {
  if (dist.size() != expected_size)
    throw std::invalid_argument("policy distribution length does not match the vocabulary");
  double total = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0)) throw std::invalid_argument("policy distribution has a negative entry");
    total += p;
  }
  if (std::abs(total - 1.0) > tol)
    throw std::invalid_argument("policy distribution does not sum to 1");
}

RewardMeans reward_means(const ProbVocab& vocab, std::span<const double> policy_dist,
                         RewardRule rule) {
  check_distribution(policy_dist, vocab.size());
  RewardMeans m;
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    if (policy_dist[j] == 0.0) continue;
    m.mu1 += policy_dist[j] * reward(vocab[j], 1, rule);
    m.mu0 += policy_dist[j] * reward(vocab[j], 0, rule);
  }
  return m;
}

double true_advantage(const ProbVocab& vocab, std::span<const double> policy_dist, double p_true,
                      std::size_t token, RewardRule rule) {
  if (token >= vocab.size()) throw std::invalid_argument("token out of range");
  if (!(p_true >= 0.0 && p_true <= 1.0)) throw std::invalid_argument("p_true outside [0,1]");
  const RewardMeans m = reward_means(vocab, policy_dist, rule);
  const double v = vocab[token];
  return p_true * (reward(v, 1, rule) - m.mu1) + (1.0 - p_true) * (reward(v, 0, rule) - m.mu0);
}

double expected_nostd_advantage(const ProbVocab& vocab, std::span<const double> policy_dist,
                                double p_true, std::size_t token, RewardRule rule,
                                std::size_t g) {
  if (g < 1) throw std::invalid_argument("group size must be at least 1");
  const double scale = static_cast<double>(g - 1) / static_cast<double>(g);
  return scale * true_advantage(vocab, policy_dist, p_true, token, rule);
}

}  // namespace probcal
