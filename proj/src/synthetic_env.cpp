#include "probcal/synthetic_env.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "probcal/rng.hpp"

namespace probcal {

namespace {
constexpr std::uint64_t kCategoryStream = 0xC47E;
constexpr std::uint64_t kDatasetStream = 0xDA7A;
}  // namespace

std::string_view to_string(Split split) { return split == Split::Train ? "train" : "eval"; }

std::string_view to_string(RewardRule rule) {
  return rule == RewardRule::LogLikelihood ? "loglik" : "brier";
}

RewardRule parse_reward_rule(std::string_view name) {
  if (name == "loglik" || name == "loglikelihood" || name == "log-likelihood")
    return RewardRule::LogLikelihood;
  if (name == "brier") return RewardRule::Brier;
  throw std::invalid_argument("unknown reward rule: " + std::string(name));
}

CategoryTable::CategoryTable(std::vector<double> rates, std::uint64_t seed)
    : rates_(std::move(rates)), seed_(seed) {
  if (rates_.empty()) throw std::invalid_argument("category table must be nonempty");
  for (double r : rates_) {
    if (!(r > 0.0 && r < 1.0))
      throw std::invalid_argument("category rate outside (0,1): " + std::to_string(r));
  }
}

double CategoryTable::rate(std::size_t category) const {
  if (category >= rates_.size()) throw std::invalid_argument("category out of range");
  return rates_[category];
}

Dataset::Dataset(std::vector<Sample> samples, Split split, std::size_t num_categories)
    : samples_(std::move(samples)), split_(split), num_categories_(num_categories) {
  if (samples_.empty()) throw std::invalid_argument("dataset must be nonempty");
  if (num_categories_ == 0) throw std::invalid_argument("dataset needs at least one category");
  for (const Sample& s : samples_) {
    if (s.category_id >= num_categories_)
      throw std::invalid_argument("sample category out of range");
    if (s.answer > 1) throw std::invalid_argument("sample answer must be 0 or 1");
  }
}

std::vector<double> Dataset::predictions_from(std::span<const double> per_category) const {
  if (per_category.size() != num_categories_)
    throw std::invalid_argument("per-category predictions have the wrong length");
  std::vector<double> preds;
  preds.reserve(samples_.size());
  for (const Sample& s : samples_) preds.push_back(per_category[s.category_id]);
  return preds;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples_.size());
  for (const Sample& s : samples_) out.push_back(s.answer);
  return out;
}

CategoryTable gen_categories(std::size_t k, std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("gen_categories: k must be positive");
  RandomStream stream(seed, {kCategoryStream});
  std::vector<double> rates(k);
  for (double& r : rates) r = stream.uniform();
  return CategoryTable(std::move(rates), seed);
}

Dataset gen_dataset(const CategoryTable& table, std::size_t n, std::uint64_t seed, Split split) {
  if (n == 0) throw std::invalid_argument("gen_dataset: n must be positive");
  RandomStream stream(seed, {kDatasetStream});
  std::vector<Sample> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::uint32_t>(stream.uniform_index(table.size()));
    samples[i] = {static_cast<std::int64_t>(i), c,
                  static_cast<std::uint8_t>(stream.bernoulli(table.rate(c)) ? 1 : 0)};
  }
  return Dataset(std::move(samples), split, table.size());
}

double reward(double p_hat, int answer, RewardRule rule) {
  if (answer != 0 && answer != 1) throw std::invalid_argument("answer must be 0 or 1");
  switch (rule) {
    case RewardRule::LogLikelihood:
      if (!(p_hat > 0.0 && p_hat < 1.0))
        throw std::invalid_argument("log-likelihood reward needs p_hat in (0,1)");
      return answer == 1 ? std::log(p_hat) : std::log1p(-p_hat);
    case RewardRule::Brier: {
      if (!(p_hat >= 0.0 && p_hat <= 1.0))
        throw std::invalid_argument("Brier reward needs p_hat in [0,1]");
      const double d = answer - p_hat;
      return -d * d;
    }
  }
  throw std::invalid_argument("unknown reward rule");
}

void write_dataset_csv(std::ostream& out, const Dataset& dataset) {
  out << "question_id,category_id,answer\n";
  for (const Sample& s : dataset.samples())
    out << s.question_id << ',' << s.category_id << ',' << static_cast<int>(s.answer) << '\n';
}

Dataset read_dataset_csv(std::istream& in, Split split, std::size_t num_categories) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "question_id,category_id,answer")
    throw std::invalid_argument("dataset CSV header mismatch: " + line);
  std::vector<Sample> samples;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    long long qid = 0;
    long long cat = 0;
    int ans = 0;
    char c1 = 0;
    char c2 = 0;
    if (!(row >> qid >> c1 >> cat >> c2 >> ans) || c1 != ',' || c2 != ',' || cat < 0 ||
        (ans != 0 && ans != 1))
      throw std::invalid_argument("malformed dataset CSV row " + std::to_string(lineno));
    samples.push_back({qid, static_cast<std::uint32_t>(cat), static_cast<std::uint8_t>(ans)});
  }
  return Dataset(std::move(samples), split, num_categories);
}

}  // namespace probcal
