// Synthetic stochastic-outcome world: categories with hidden Bernoulli rates,
// question datasets drawn from them, and proper-scoring-rule rewards.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace probcal {

enum class Split { Train, Eval };
enum class RewardRule { LogLikelihood, Brier };

std::string_view to_string(Split split);
std::string_view to_string(RewardRule rule);
/// Accepts "loglik"/"loglikelihood" and "brier".
RewardRule parse_reward_rule(std::string_view name);

/// Ground-truth answer rate per category. Every rate lies strictly in (0,1).
class CategoryTable {
 public:
  CategoryTable(std::vector<double> rates, std::uint64_t seed);

  std::size_t size() const noexcept { return rates_.size(); }
  double rate(std::size_t category) const;
  std::span<const double> rates() const noexcept { return rates_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::vector<double> rates_;
  std::uint64_t seed_;
};

struct Sample {
  std::int64_t question_id = 0;
  std::uint32_t category_id = 0;
  std::uint8_t answer = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

class Dataset {
 public:
  Dataset(std::vector<Sample> samples, Split split, std::size_t num_categories);

  std::span<const Sample> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  Split split() const noexcept { return split_; }
  std::size_t num_categories() const noexcept { return num_categories_; }

  std::vector<double> predictions_from(std::span<const double> per_category) const;
  std::vector<int> labels() const;

 private:
  std::vector<Sample> samples_;
  Split split_;
  std::size_t num_categories_;
};

/// k rates i.i.d. Uniform(0,1) from the stream addressed by seed.
CategoryTable gen_categories(std::size_t k, std::uint64_t seed);

/// n questions with uniformly assigned categories and Bernoulli answers.
Dataset gen_dataset(const CategoryTable& table, std::size_t n, std::uint64_t seed, Split split);

/// LogLikelihood: a ln p + (1-a) ln(1-p), p in (0,1).
/// Brier: -(a-p)^2, p in [0,1].
double reward(double p_hat, int answer, RewardRule rule);

/// CSV with header `question_id,category_id,answer`.
void write_dataset_csv(std::ostream& out, const Dataset& dataset);
Dataset read_dataset_csv(std::istream& in, Split split, std::size_t num_categories);

}  // namespace probcal
