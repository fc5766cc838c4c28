// Advantage-bias analysis under fixed policies: exact advantage curves,
// Monte-Carlo expectations of the group estimators, within-group reward
// spreads and the closed-form approximation of the normalized estimator.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "probcal/advantage.hpp"
#include "probcal/policy.hpp"
#include "probcal/synthetic_env.hpp"

namespace probcal {

/// A fixed categorical policy over a vocabulary.
struct FixedPolicy {
  std::vector<double> dist;
  std::string label;
};

/// Cell-mass discretization of Beta(alpha, beta): interior cell boundaries are
/// midpoints between adjacent tokens; the edge cells extend to 0 and 1.
FixedPolicy discretize_beta(double alpha, double beta,
                            const ProbVocab& vocab = ProbVocab::standard());

/// The same distribution mirrored across 0.5 (token k <-> token V-1-k).
FixedPolicy mirrored(const FixedPolicy& policy);

std::vector<double> exact_advantage_curve(const FixedPolicy& policy, const ProbVocab& vocab,
                                          double p_true, RewardRule rule);

struct CurvePoint {
  double token_value = 0.0;
  double exact_adv = 0.0;
  std::optional<double> est_mean;
  std::optional<double> est_stderr;
  std::size_t n_samples = 0;
};

struct AdvantageCurve {
  std::vector<CurvePoint> points;
  Estimator estimator = Estimator::GRPO;
  std::string policy_label;
  RewardRule rule = RewardRule::LogLikelihood;
  std::size_t group_size = 0;
  std::size_t n_groups = 0;
};

struct MonteCarloConfig {
  EstimatorSpec estimator{Estimator::GRPO, 1e-4};
  std::size_t group_size = 1000;
  /// Number of sampled groups, each holding group_size predictions.
  std::size_t n_groups = 100000;
  std::size_t min_count = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// Samples groups of predictions from the policy with one Bernoulli(p_true)
/// answer per group and averages the estimator's advantage per token over all
/// occurrences. Standard errors treat groups as independent clusters
/// (occurrences within a group share the answer). Tokens seen fewer than
/// min_count times carry no estimate. Only GRPO and GRPO_NoStd are accepted.
AdvantageCurve empirical_advantage_curve(const FixedPolicy& policy, const ProbVocab& vocab,
                                         double p_true, RewardRule rule,
                                         const MonteCarloConfig& config);

struct PinnedEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_groups = 0;
};

/// Estimate of E[A_hat | prediction = token] with the token pinned into one
/// slot of every group and the other G-1 slots drawn from the policy. Gives an
/// estimate for tokens the policy almost never emits.
PinnedEstimate pinned_advantage(const FixedPolicy& policy, const ProbVocab& vocab, double p_true,
                                RewardRule rule, std::size_t token,
                                const MonteCarloConfig& config);

struct SigmaPair {
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  double stderr0 = 0.0;
  double stderr1 = 0.0;
};

/// Mean over n_groups sampled groups of the within-group population standard
/// deviation of r(., 1) and r(., 0).
SigmaPair sigma_estimates(const FixedPolicy& policy, const ProbVocab& vocab, RewardRule rule,
                          std::size_t g, std::size_t n_groups, std::uint64_t seed,
                          unsigned threads = 1);

/// p (r(v,1) - mu_1) / (sigma_1 + eps) + (1-p) (r(v,0) - mu_0) / (sigma_0 + eps).
std::vector<double> approx_grpo_advantage(const FixedPolicy& policy, const ProbVocab& vocab,
                                          double p_true, RewardRule rule, const SigmaPair& sigma,
                                          double eps);

/// token_value,exact_adv,est_mean,est_stderr,n_samples,estimator,policy_label,rule
void write_curve_csv_header(std::ostream& out);
void write_curve_csv_rows(std::ostream& out, const AdvantageCurve& curve);
/// policy_label,rule,sigma0,sigma1,stderr0,stderr1
void write_sigma_csv_header(std::ostream& out);
void write_sigma_csv_row(std::ostream& out, const std::string& label, RewardRule rule,
                         const SigmaPair& sigma);

}  // namespace probcal
