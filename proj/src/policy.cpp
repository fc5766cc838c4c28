#include "probcal/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace probcal {

ProbVocab::ProbVocab(std::vector<double> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw std::invalid_argument("vocabulary must be nonempty");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!(tokens_[i] > 0.0 && tokens_[i] < 1.0))
      throw std::invalid_argument("vocabulary tokens must lie in (0,1)");
    if (i > 0 && !(tokens_[i] > tokens_[i - 1]))
      throw std::invalid_argument("vocabulary must be strictly increasing");
  }
}

ProbVocab ProbVocab::standard() {
  std::vector<double> t(99);
  for (int i = 0; i < 99; ++i) t[i] = (i + 1) / 100.0;
  return ProbVocab(std::move(t));
}

std::size_t ProbVocab::nearest(double p) const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < tokens_.size(); ++i)
    if (std::abs(tokens_[i] - p) < std::abs(tokens_[best] - p)) best = i;
  return best;
}

TabularPolicy::TabularPolicy(std::size_t num_categories, ProbVocab vocab)
    : TabularPolicy(num_categories, vocab,
                    std::vector<double>(num_categories * vocab.size(), 0.0)) {}

TabularPolicy::TabularPolicy(std::size_t num_categories, ProbVocab vocab,
                             std::vector<double> logits)
    : num_categories_(num_categories), vocab_(std::move(vocab)), logits_(std::move(logits)) {
  if (num_categories_ == 0) throw std::invalid_argument("policy needs at least one category");
  if (logits_.size() != num_categories_ * vocab_.size())
    throw std::invalid_argument("logit table has the wrong shape");
  for (double x : logits_)
    if (!std::isfinite(x)) throw std::invalid_argument("logits must be finite");
}

void TabularPolicy::check_category(std::size_t category) const {
  if (category >= num_categories_) throw std::invalid_argument("category out of range");
}

std::span<const double> TabularPolicy::logits(std::size_t category) const {
  check_category(category);
  return std::span<const double>(logits_).subspan(category * vocab_.size(), vocab_.size());
}

std::span<double> TabularPolicy::logits(std::size_t category) {
  check_category(category);
  return std::span<double>(logits_).subspan(category * vocab_.size(), vocab_.size());
}

std::vector<double> TabularPolicy::log_probs(std::size_t category) const {
  const auto row = logits(category);
  const double mx = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (double x : row) total += std::exp(x - mx);
  const double log_z = mx + std::log(total);
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] - log_z;
  return out;
}

std::vector<double> policy_probs(const TabularPolicy& policy, std::size_t category) {
  const auto row = policy.logits(category);
  const double mx = *std::max_element(row.begin(), row.end());
  std::vector<double> p(row.size());
  double total = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    p[i] = std::exp(row[i] - mx);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

RowSampler::RowSampler(const TabularPolicy& policy, std::size_t category)
    : probs_(policy_probs(policy, category)),
      logp_(policy.log_probs(category)),
      cdf_(probs_.size()),
      vocab_(&policy.vocab()) {
  double acc = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) cdf_[i] = (acc += probs_[i]);
}

SampledToken RowSampler::draw(RandomStream& stream) const {
  const double u = stream.uniform() * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  std::size_t k = std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1);
  // Zero-probability tokens can share a CDF value with a neighbour; never
  // emit one.
  while (probs_[k] == 0.0 && k > 0) --k;
  return {k, (*vocab_)[k], logp_[k]};
}

std::vector<SampledToken> sample_group(const TabularPolicy& policy, std::size_t category,
                                       std::size_t g, RandomStream& stream) {
  if (g == 0) throw std::invalid_argument("group size must be positive");
  const RowSampler sampler(policy, category);
  std::vector<SampledToken> out(g);
  for (auto& draw : out) draw = sampler.draw(stream);
  return out;
}

std::vector<double> grad_logprob(const TabularPolicy& policy, std::size_t category,
                                 std::size_t token) {
  if (token >= policy.vocab_size()) throw std::invalid_argument("token out of range");
  auto g = policy_probs(policy, category);
  for (double& x : g) x = -x;
  g[token] += 1.0;
  return g;
}

double mean_prediction(const TabularPolicy& policy, std::size_t category) {
  const auto p = policy_probs(policy, category);
  double m = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) m += p[i] * policy.vocab()[i];
  const auto v = policy.vocab().values();
  return std::clamp(m, v.front(), v.back());
}

double argmax_prediction(const TabularPolicy& policy, std::size_t category) {
  const auto row = policy.logits(category);
  return policy.vocab()[std::max_element(row.begin(), row.end()) - row.begin()];
}

double value_lookup(const ValueTable& values, std::size_t category) {
  if (category >= values.psi.size()) throw std::invalid_argument("category out of range");
  return values.psi[category];
}

std::string checkpoint_to_json(const TabularPolicy& policy, const ValueTable& values) {
  nlohmann::json j;
  j["vocab"] = std::vector<double>(policy.vocab().values().begin(), policy.vocab().values().end());
  auto rows = nlohmann::json::array();
  for (std::size_t c = 0; c < policy.num_categories(); ++c) {
    const auto row = policy.logits(c);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["logits"] = std::move(rows);
  j["psi"] = values.psi;
  return j.dump();
}

Checkpoint checkpoint_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    ProbVocab vocab(j.at("vocab").get<std::vector<double>>());
    const auto& rows = j.at("logits");
    std::vector<double> flat;
    for (const auto& row : rows) {
      auto r = row.get<std::vector<double>>();
      if (r.size() != vocab.size()) throw std::invalid_argument("logit row length mismatch");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    TabularPolicy policy(rows.size(), std::move(vocab), std::move(flat));
    ValueTable values(j.at("psi").get<std::vector<double>>());
    if (values.size() != policy.num_categories())
      throw std::invalid_argument("psi length does not match the number of categories");
    return {std::move(policy), std::move(values)};
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace probcal
