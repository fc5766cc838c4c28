// The tabular "language model": one categorical distribution over probability
// tokens per question category, plus the per-category value table used by PPO.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "probcal/rng.hpp"

namespace probcal {

/// Strictly increasing token values inside (0,1).
class ProbVocab {
 public:
  explicit ProbVocab(std::vector<double> tokens);

  /// 0.01, 0.02, ..., 0.99.
  static ProbVocab standard();

  std::size_t size() const noexcept { return tokens_.size(); }
  double operator[](std::size_t i) const { return tokens_[i]; }
  std::span<const double> values() const noexcept { return tokens_; }

  /// Index of the token closest to p (lower index on exact ties).
  std::size_t nearest(double p) const;

  friend bool operator==(const ProbVocab&, const ProbVocab&) = default;

 private:
  std::vector<double> tokens_;
};

class TabularPolicy {
 public:
  /// All-zero logits, i.e. the uniform policy.
  TabularPolicy(std::size_t num_categories, ProbVocab vocab);
  TabularPolicy(std::size_t num_categories, ProbVocab vocab, std::vector<double> logits);

  std::size_t num_categories() const noexcept { return num_categories_; }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  const ProbVocab& vocab() const noexcept { return vocab_; }

  std::span<const double> logits(std::size_t category) const;
  std::span<double> logits(std::size_t category);
  std::span<const double> all_logits() const noexcept { return logits_; }
  std::span<double> all_logits() noexcept { return logits_; }

  /// Numerically stable log-softmax of one row.
  std::vector<double> log_probs(std::size_t category) const;

  friend bool operator==(const TabularPolicy&, const TabularPolicy&) = default;

 private:
  void check_category(std::size_t category) const;

  std::size_t num_categories_;
  ProbVocab vocab_;
  std::vector<double> logits_;  // row-major, num_categories x vocab
};

struct ValueTable {
  std::vector<double> psi;

  /// Zero-initialized.
  explicit ValueTable(std::size_t num_categories) : psi(num_categories, 0.0) {}
  explicit ValueTable(std::vector<double> values) : psi(std::move(values)) {}

  std::size_t size() const noexcept { return psi.size(); }
  friend bool operator==(const ValueTable&, const ValueTable&) = default;
};

struct SampledToken {
  std::size_t token = 0;
  double prob = 0.0;     // token value, i.e. the predicted probability
  double logprob = 0.0;  // log pi(token) at sampling time
};

struct RolloutEntry {
  std::size_t token = 0;
  double prob = 0.0;
  double logprob_old = 0.0;
  double reward = 0.0;
  double advantage = 0.0;
};

struct PromptGroup {
  std::size_t category = 0;
  int answer = 0;
  std::vector<RolloutEntry> entries;
};

/// One rollout: groups of G predictions per sampled prompt. The stored
/// log-probabilities are those of the sampling-time policy (pi_old).
struct RolloutBatch {
  std::size_t group_size = 0;
  std::vector<PromptGroup> groups;

  std::size_t num_entries() const noexcept { return group_size * groups.size(); }
};

std::vector<double> policy_probs(const TabularPolicy& policy, std::size_t category);

/// g i.i.d. draws from the category's distribution.
std::vector<SampledToken> sample_group(const TabularPolicy& policy, std::size_t category,
                                       std::size_t g, RandomStream& stream);

/// Inverse-CDF sampler for one category row, reusable across prompts of a
/// rollout. Draws are identical to sample_group on the same row.
class RowSampler {
 public:
  RowSampler(const TabularPolicy& policy, std::size_t category);
  SampledToken draw(RandomStream& stream) const;

 private:
  std::vector<double> probs_;
  std::vector<double> logp_;
  std::vector<double> cdf_;
  const ProbVocab* vocab_;
};

/// Gradient of log pi(token | category) with respect to that category's
/// logits: one_hot(token) - softmax(row).
std::vector<double> grad_logprob(const TabularPolicy& policy, std::size_t category,
                                 std::size_t token);

/// Expected token value under the category's distribution.
double mean_prediction(const TabularPolicy& policy, std::size_t category);
/// Value of the most probable token.
double argmax_prediction(const TabularPolicy& policy, std::size_t category);

double value_lookup(const ValueTable& values, std::size_t category);

/// {"vocab": [...], "logits": [[...], ...], "psi": [...]}. Doubles round-trip
/// exactly.
std::string checkpoint_to_json(const TabularPolicy& policy, const ValueTable& values);

struct Checkpoint {
  TabularPolicy policy;
  ValueTable values;
};
Checkpoint checkpoint_from_json(std::string_view text);

}  // namespace probcal
