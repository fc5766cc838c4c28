#include "probcal/bias_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "parallel.hpp"
#include "probcal/beta.hpp"
#include "probcal/errors.hpp"
#include "probcal/format.hpp"
#include "probcal/rng.hpp"

namespace probcal {

namespace {

constexpr std::uint64_t kCurveStream = 0xB1A5;
constexpr std::uint64_t kPinnedStream = 0x914E;
constexpr std::uint64_t kSigmaStream = 0x5194;
constexpr std::size_t kMaxChunks = 256;

// Walker alias table for O(1) categorical draws.
class AliasSampler {
 public:
  explicit AliasSampler(std::span<const double> probs) : prob_(probs.size()), alias_(probs.size()) {
    const std::size_t n = probs.size();
    std::vector<double> scaled(n);
    std::vector<std::size_t> small;
    std::vector<std::size_t> large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = probs[i] * static_cast<double>(n);
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back();
      small.pop_back();
      const std::size_t l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] -= 1.0 - scaled[s];
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (std::size_t i : large) prob_[i] = 1.0, alias_[i] = i;
    // Leftovers from rounding are full columns.
    for (std::size_t i : small) prob_[i] = 1.0, alias_[i] = i;
  }

  std::size_t draw(RandomStream& stream) const {
    const std::uint64_t u = stream.next_u64();
    const auto column = static_cast<std::size_t>(((u >> 32) * prob_.size()) >> 32);
    const double coin = static_cast<double>(u & 0xFFFFFFFFull) * 0x1.0p-32;
    return coin < prob_[column] ? column : alias_[column];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

void check_policy(const FixedPolicy& policy, const ProbVocab& vocab) {
  check_distribution(policy.dist, vocab.size(), 1e-12);
}

struct RewardTable {
  std::vector<double> r1;
  std::vector<double> r0;
};

RewardTable reward_table(const ProbVocab& vocab, RewardRule rule) {
  RewardTable t{std::vector<double>(vocab.size()), std::vector<double>(vocab.size())};
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    t.r1[k] = reward(vocab[k], 1, rule);
    t.r0[k] = reward(vocab[k], 0, rule);
  }
  return t;
}

struct GroupMoments {
  double mean = 0.0;
  double sd = 0.0;
};

GroupMoments moments_from_counts(std::span<const std::uint32_t> counts, std::span<const double> r,
                                 std::size_t g) {
  double total = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k)
    if (counts[k]) total += counts[k] * r[k];
  const double mean = total / static_cast<double>(g);
  double ss = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (!counts[k]) continue;
    const double d = r[k] - mean;
    ss += counts[k] * d * d;
  }
  return {mean, std::sqrt(ss / static_cast<double>(g))};
}

double estimator_advantage(const EstimatorSpec& spec, double r, const GroupMoments& m) {
  const double centered = r - m.mean;
  if (spec.kind == Estimator::GRPO_NoStd) return centered;
  const double denom = m.sd + spec.eps;
  return denom == 0.0 ? 0.0 : centered / denom;
}

void check_mc_config(const MonteCarloConfig& config) {
  if (config.estimator.kind != Estimator::GRPO && config.estimator.kind != Estimator::GRPO_NoStd)
    throw InvalidConfiguration("advantage curves support the grpo and grpo-nostd estimators only");
  if (config.group_size < 2) throw std::invalid_argument("group size must be at least 2");
  if (config.n_groups < 1) throw std::invalid_argument("need at least one group");
  if (!(config.estimator.eps >= 0.0)) throw std::invalid_argument("eps must be nonnegative");
}

std::size_t chunk_count(std::size_t n_groups) { return std::min(n_groups, kMaxChunks); }

std::pair<std::size_t, std::size_t> chunk_range(std::size_t chunk, std::size_t n_chunks,
                                                std::size_t n) {
  return {chunk * n / n_chunks, (chunk + 1) * n / n_chunks};
}

// Per-token cluster sums: occurrences n_g and advantage sums S_g per group.
struct TokenSums {
  double n = 0.0;
  double s = 0.0;
  double ss = 0.0;
  double sn = 0.0;
  double nn = 0.0;

  void add(double count, double sum) {
    n += count;
    s += sum;
    ss += sum * sum;
    sn += sum * count;
    nn += count * count;
  }
  void merge(const TokenSums& o) {
    n += o.n;
    s += o.s;
    ss += o.ss;
    sn += o.sn;
    nn += o.nn;
  }
};

}  // namespace

FixedPolicy discretize_beta(double alpha, double beta, const ProbVocab& vocab) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw std::invalid_argument("Beta parameters must be positive");
  const std::size_t V = vocab.size();
  std::vector<double> dist(V);
  double prev_cdf = 0.0;
  for (std::size_t k = 0; k < V; ++k) {
    const double upper = k + 1 < V ? 0.5 * (vocab[k] + vocab[k + 1]) : 1.0;
    const double cdf = beta_cdf(upper, alpha, beta);
    dist[k] = std::max(0.0, cdf - prev_cdf);
    prev_cdf = cdf;
  }
  double total = 0.0;
  for (double p : dist) total += p;
  for (double& p : dist) p /= total;
  std::ostringstream label;
  label << "Beta(" << alpha << ',' << beta << ')';
  return {std::move(dist), label.str()};
}

FixedPolicy mirrored(const FixedPolicy& policy) {
  FixedPolicy out{std::vector<double>(policy.dist.rbegin(), policy.dist.rend()),
                  policy.label + "[mirrored]"};
  return out;
}

std::vector<double> exact_advantage_curve(const FixedPolicy& policy, const ProbVocab& vocab,
                                          double p_true, RewardRule rule) {
  check_policy(policy, vocab);
  std::vector<double> out(vocab.size());
  for (std::size_t k = 0; k < vocab.size(); ++k)
    out[k] = true_advantage(vocab, policy.dist, p_true, k, rule);
  return out;
}

AdvantageCurve empirical_advantage_curve(const FixedPolicy& policy, const ProbVocab& vocab,
                                         double p_true, RewardRule rule,
                                         const MonteCarloConfig& config) {
  check_policy(policy, vocab);
  check_mc_config(config);
  if (!(p_true >= 0.0 && p_true <= 1.0)) throw std::invalid_argument("p_true outside [0,1]");

  const std::size_t V = vocab.size();
  const std::size_t G = config.group_size;
  const AliasSampler sampler(policy.dist);
  const RewardTable rewards = reward_table(vocab, rule);
  const std::size_t n_chunks = chunk_count(config.n_groups);
  std::vector<std::vector<TokenSums>> partial(n_chunks, std::vector<TokenSums>(V));

  detail::for_each_chunk(n_chunks, config.threads, [&](std::size_t chunk) {
    RandomStream stream(config.seed, {kCurveStream, chunk});
    auto& sums = partial[chunk];
    std::vector<std::uint32_t> counts(V);
    const auto [lo, hi] = chunk_range(chunk, n_chunks, config.n_groups);
    for (std::size_t grp = lo; grp < hi; ++grp) {
      std::fill(counts.begin(), counts.end(), 0u);
      for (std::size_t i = 0; i < G; ++i) ++counts[sampler.draw(stream)];
      const bool answer = stream.bernoulli(p_true);
      const auto& r = answer ? rewards.r1 : rewards.r0;
      const GroupMoments m = moments_from_counts(counts, r, G);
      for (std::size_t k = 0; k < V; ++k) {
        if (!counts[k]) continue;
        const double adv = estimator_advantage(config.estimator, r[k], m);
        sums[k].add(counts[k], counts[k] * adv);
      }
    }
  });

  std::vector<TokenSums> total(V);
  for (const auto& chunk : partial)
    for (std::size_t k = 0; k < V; ++k) total[k].merge(chunk[k]);

  const auto exact = exact_advantage_curve(policy, vocab, p_true, rule);
  AdvantageCurve curve;
  curve.estimator = config.estimator.kind;
  curve.policy_label = policy.label;
  curve.rule = rule;
  curve.group_size = G;
  curve.n_groups = config.n_groups;
  const auto H = static_cast<double>(config.n_groups);
  for (std::size_t k = 0; k < V; ++k) {
    CurvePoint pt;
    pt.token_value = vocab[k];
    pt.exact_adv = exact[k];
    pt.n_samples = static_cast<std::size_t>(total[k].n);
    if (pt.n_samples >= config.min_count && pt.n_samples > 0) {
      const TokenSums& t = total[k];
      const double mean = t.s / t.n;
      // Cluster-robust (ratio estimator) variance over groups.
      double resid = t.ss - 2.0 * mean * t.sn + mean * mean * t.nn;
      resid = std::max(resid, 0.0);
      const double correction = H > 1.0 ? H / (H - 1.0) : 1.0;
      pt.est_mean = mean;
      pt.est_stderr = std::sqrt(resid * correction) / t.n;
    }
    curve.points.push_back(pt);
  }
  return curve;
}

PinnedEstimate pinned_advantage(const FixedPolicy& policy, const ProbVocab& vocab, double p_true,
                                RewardRule rule, std::size_t token,
                                const MonteCarloConfig& config) {
  check_policy(policy, vocab);
  check_mc_config(config);
  if (token >= vocab.size()) throw std::invalid_argument("token out of range");

  const std::size_t V = vocab.size();
  const std::size_t G = config.group_size;
  const AliasSampler sampler(policy.dist);
  const RewardTable rewards = reward_table(vocab, rule);
  const std::size_t n_chunks = chunk_count(config.n_groups);
  std::vector<std::pair<double, double>> partial(n_chunks);

  detail::for_each_chunk(n_chunks, config.threads, [&](std::size_t chunk) {
    RandomStream stream(config.seed, {kPinnedStream, token, chunk});
    std::vector<std::uint32_t> counts(V);
    double sum = 0.0;
    double sumsq = 0.0;
    const auto [lo, hi] = chunk_range(chunk, n_chunks, config.n_groups);
    for (std::size_t grp = lo; grp < hi; ++grp) {
      std::fill(counts.begin(), counts.end(), 0u);
      counts[token] = 1;
      for (std::size_t i = 1; i < G; ++i) ++counts[sampler.draw(stream)];
      const bool answer = stream.bernoulli(p_true);
      const auto& r = answer ? rewards.r1 : rewards.r0;
      const double adv =
          estimator_advantage(config.estimator, r[token], moments_from_counts(counts, r, G));
      sum += adv;
      sumsq += adv * adv;
    }
    partial[chunk] = {sum, sumsq};
  });

  double sum = 0.0;
  double sumsq = 0.0;
  for (const auto& [s, ss] : partial) {
    sum += s;
    sumsq += ss;
  }
  const auto n = static_cast<double>(config.n_groups);
  const double mean = sum / n;
  const double var = n > 1.0 ? std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0)) : 0.0;
  return {mean, std::sqrt(var / n), config.n_groups};
}

SigmaPair sigma_estimates(const FixedPolicy& policy, const ProbVocab& vocab, RewardRule rule,
                          std::size_t g, std::size_t n_groups, std::uint64_t seed,
                          unsigned threads) {
  check_policy(policy, vocab);
  if (g < 2) throw std::invalid_argument("group size must be at least 2");
  if (n_groups < 1) throw std::invalid_argument("need at least one group");

  const std::size_t V = vocab.size();
  const AliasSampler sampler(policy.dist);
  const RewardTable rewards = reward_table(vocab, rule);
  const std::size_t n_chunks = chunk_count(n_groups);
  struct Acc {
    double s0 = 0.0, ss0 = 0.0, s1 = 0.0, ss1 = 0.0;
  };
  std::vector<Acc> partial(n_chunks);

  detail::for_each_chunk(n_chunks, threads, [&](std::size_t chunk) {
    RandomStream stream(seed, {kSigmaStream, chunk});
    std::vector<std::uint32_t> counts(V);
    Acc acc;
    const auto [lo, hi] = chunk_range(chunk, n_chunks, n_groups);
    for (std::size_t grp = lo; grp < hi; ++grp) {
      std::fill(counts.begin(), counts.end(), 0u);
      for (std::size_t i = 0; i < g; ++i) ++counts[sampler.draw(stream)];
      const double sd1 = moments_from_counts(counts, rewards.r1, g).sd;
      const double sd0 = moments_from_counts(counts, rewards.r0, g).sd;
      acc.s1 += sd1;
      acc.ss1 += sd1 * sd1;
      acc.s0 += sd0;
      acc.ss0 += sd0 * sd0;
    }
    partial[chunk] = acc;
  });

  Acc acc;
  for (const auto& p : partial) {
    acc.s0 += p.s0;
    acc.ss0 += p.ss0;
    acc.s1 += p.s1;
    acc.ss1 += p.ss1;
  }
  const auto n = static_cast<double>(n_groups);
  auto stderr_of = [n](double s, double ss) {
    if (n < 2.0) return 0.0;
    const double m = s / n;
    return std::sqrt(std::max(0.0, (ss - n * m * m) / (n - 1.0)) / n);
  };
  return {acc.s0 / n, acc.s1 / n, stderr_of(acc.s0, acc.ss0), stderr_of(acc.s1, acc.ss1)};
}

std::vector<double> approx_grpo_advantage(const FixedPolicy& policy, const ProbVocab& vocab,
                                          double p_true, RewardRule rule, const SigmaPair& sigma,
                                          double eps) {
  check_policy(policy, vocab);
  if (!(sigma.sigma0 >= 0.0) || !(sigma.sigma1 >= 0.0))
    throw std::invalid_argument("sigma must be nonnegative");
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be nonnegative");
  const RewardMeans mu = reward_means(vocab, policy.dist, rule);
  const double w1 = sigma.sigma1 + eps;
  const double w0 = sigma.sigma0 + eps;
  std::vector<double> out(vocab.size());
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    const double t1 = p_true * (reward(vocab[k], 1, rule) - mu.mu1);
    const double t0 = (1.0 - p_true) * (reward(vocab[k], 0, rule) - mu.mu0);
    // A zero weight can only meet a zero term (point-mass policy at this token).
    out[k] = (w1 > 0.0 ? t1 / w1 : 0.0) + (w0 > 0.0 ? t0 / w0 : 0.0);
  }
  return out;
}

void write_curve_csv_header(std::ostream& out) {
  out << "token_value,exact_adv,est_mean,est_stderr,n_samples,estimator,policy_label,rule\n";
}

void write_curve_csv_rows(std::ostream& out, const AdvantageCurve& curve) {
  for (const auto& p : curve.points) {
    out << fmt_double(p.token_value) << ',' << fmt_double(p.exact_adv) << ','
        << (p.est_mean ? fmt_double(*p.est_mean) : "") << ','
        << (p.est_stderr ? fmt_double(*p.est_stderr) : "") << ',' << p.n_samples << ','
        << to_string(curve.estimator) << ",\"" << curve.policy_label << "\","
        << to_string(curve.rule) << '\n';
  }
}

void write_sigma_csv_header(std::ostream& out) {
  out << "policy_label,rule,sigma0,sigma1,stderr0,stderr1\n";
}

void write_sigma_csv_row(std::ostream& out, const std::string& label, RewardRule rule,
                         const SigmaPair& sigma) {
  out << '"' << label << "\"," << to_string(rule) << ',' << fmt_double(sigma.sigma0) << ','
      << fmt_double(sigma.sigma1) << ',' << fmt_double(sigma.stderr0) << ','
      << fmt_double(sigma.stderr1) << '\n';
}

}  // namespace probcal
