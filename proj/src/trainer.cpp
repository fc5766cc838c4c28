#include "probcal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "probcal/errors.hpp"
#include "probcal/format.hpp"
#include "probcal/rng.hpp"

namespace probcal {

namespace {
constexpr std::uint64_t kEpochStream = 0xE90C;
constexpr std::uint64_t kRolloutStream = 0x9011;

constexpr double kDefaultAdamLr = 2.5e-3;
constexpr double kDefaultSgdLr = 50.0;
}  // namespace

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd") return OptimizerKind::Sgd;
  throw std::invalid_argument("unknown optimizer: " + std::string(name));
}

std::string_view to_string(Readout readout) {
  return readout == Readout::Mean ? "mean" : "argmax";
}

Readout parse_readout(std::string_view name) {
  if (name == "mean") return Readout::Mean;
  if (name == "argmax") return Readout::Argmax;
  throw std::invalid_argument("unknown readout: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Optimizer

GradientOptimizer::GradientOptimizer(std::size_t num_params, OptimizerConfig config)
    : config_(config), m_(num_params, 0.0), v_(num_params, 0.0), t_(num_params, 0) {
  if (!(config_.lr > 0.0)) throw InvalidConfiguration("learning rate must be positive");
}

void GradientOptimizer::step(std::span<double> params, std::span<const double> grad, bool ascend,
                             std::span<const std::uint8_t> mask) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw std::invalid_argument("optimizer parameter count mismatch");
  if (!mask.empty() && mask.size() != m_.size())
    throw std::invalid_argument("optimizer mask size mismatch");
  const double sign = ascend ? 1.0 : -1.0;
  const auto& c = config_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    if (c.kind == OptimizerKind::Sgd) {
      params[i] += sign * c.lr * grad[i];
      continue;
    }
    const std::uint32_t t = ++t_[i];
    m_[i] = c.beta1 * m_[i] + (1.0 - c.beta1) * grad[i];
    v_[i] = c.beta2 * v_[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    const double m_hat = m_[i] / (1.0 - std::pow(c.beta1, t));
    const double v_hat = v_[i] / (1.0 - std::pow(c.beta2, t));
    params[i] += sign * c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
  if (group_size < 1) throw InvalidConfiguration("group size must be positive");
  if (group_size < min_group_size(algo.kind))
    throw InvalidConfiguration(std::string(to_string(algo.kind)) +
                               " needs a group size of at least 2");
  if (prompts_per_rollout < 1) throw InvalidConfiguration("prompts per rollout must be positive");
  if (updates_per_rollout < 1) throw InvalidConfiguration("updates per rollout must be positive");
  if (updates_per_rollout > 1 && !clip_eps)
    throw InvalidConfiguration("several updates per rollout require a clipping threshold");
  if (clip_eps && !(*clip_eps > 0.0)) throw InvalidConfiguration("clip threshold must be positive");
  if (!(algo.eps >= 0.0)) throw InvalidConfiguration("GRPO eps must be nonnegative");
  if (!(policy_lr >= 0.0)) throw InvalidConfiguration("policy learning rate must be positive");
  if (!(value_lr > 0.0)) throw InvalidConfiguration("value learning rate must be positive");
  if (eval_every < 1) throw InvalidConfiguration("eval interval must be positive");
}

double TrainConfig::effective_policy_lr() const {
  if (policy_lr > 0.0) return policy_lr;
  return optimizer == OptimizerKind::Adam ? kDefaultAdamLr : kDefaultSgdLr;
}

// ---------------------------------------------------------------------------
// Rollouts

std::vector<std::size_t> rollout_prompts(std::size_t dataset_size, std::size_t prompts,
                                         std::uint64_t seed, std::size_t step) {
  if (dataset_size == 0) throw std::invalid_argument("dataset must be nonempty");
  std::vector<std::size_t> out;
  out.reserve(prompts);
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::size_t> perm(dataset_size);
  const std::size_t first = (step - 1) * prompts;
  for (std::size_t k = 0; k < prompts; ++k) {
    const std::size_t global = first + k;
    const std::size_t epoch = global / dataset_size;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      RandomStream stream(seed, {kEpochStream, epoch});
      for (std::size_t i = dataset_size - 1; i > 0; --i)
        std::swap(perm[i], perm[stream.uniform_index(i + 1)]);
      cached_epoch = epoch;
    }
    out.push_back(perm[global % dataset_size]);
  }
  return out;
}

void assign_advantages(RolloutBatch& batch, const EstimatorSpec& spec, const ValueTable& values) {
  std::vector<double> rewards;
  for (auto& group : batch.groups) {
    rewards.clear();
    for (const auto& e : group.entries) rewards.push_back(e.reward);
    const double value = spec.kind == Estimator::PPO ? value_lookup(values, group.category) : 0.0;
    const auto adv = group_advantages(spec, rewards, value);
    for (std::size_t i = 0; i < adv.size(); ++i) group.entries[i].advantage = adv[i];
  }
}

RolloutBatch collect_rollouts(const TabularPolicy& policy, const ValueTable& values,
                              const Dataset& dataset, const TrainConfig& config,
                              std::size_t step) {
  const auto prompts =
      rollout_prompts(dataset.size(), config.prompts_per_rollout, config.seed, step);
  std::vector<RowSampler> samplers;
  samplers.reserve(policy.num_categories());
  for (std::size_t c = 0; c < policy.num_categories(); ++c) samplers.emplace_back(policy, c);

  RolloutBatch batch;
  batch.group_size = config.group_size;
  batch.groups.reserve(prompts.size());
  for (std::size_t gi = 0; gi < prompts.size(); ++gi) {
    const Sample& s = dataset[prompts[gi]];
    if (s.category_id >= samplers.size()) throw std::invalid_argument("category out of range");
    RandomStream stream(config.seed, {kRolloutStream, step, gi});
    PromptGroup group{s.category_id, s.answer, {}};
    group.entries.reserve(config.group_size);
    for (std::size_t i = 0; i < config.group_size; ++i) {
      const SampledToken draw = samplers[s.category_id].draw(stream);
      group.entries.push_back(
          {draw.token, draw.prob, draw.logprob, reward(draw.prob, s.answer, config.reward), 0.0});
    }
    batch.groups.push_back(std::move(group));
  }
  assign_advantages(batch, config.algo, values);
  return batch;
}

// ---------------------------------------------------------------------------
// Policy updates

namespace {

std::vector<double> all_probs(const TabularPolicy& policy) {
  std::vector<double> out;
  out.reserve(policy.num_categories() * policy.vocab_size());
  for (std::size_t c = 0; c < policy.num_categories(); ++c) {
    const auto p = policy_probs(policy, c);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

// grad[c] += sum_i w_i (one_hot(o_i) - pi_c) given per-entry weights.
template <typename WeightFn>
std::vector<double> accumulate_gradient(const TabularPolicy& policy, const RolloutBatch& batch,
                                        const std::vector<double>& probs, WeightFn&& weight) {
  const std::size_t V = policy.vocab_size();
  std::vector<double> grad(policy.num_categories() * V, 0.0);
  std::vector<double> row_weight(policy.num_categories(), 0.0);
  for (const auto& group : batch.groups) {
    for (const auto& e : group.entries) {
      const double w = weight(group, e);
      grad[group.category * V + e.token] += w;
      row_weight[group.category] += w;
    }
  }
  const double n = static_cast<double>(batch.num_entries());
  for (std::size_t c = 0; c < policy.num_categories(); ++c) {
    for (std::size_t k = 0; k < V; ++k) {
      double& g = grad[c * V + k];
      g = (g - row_weight[c] * probs[c * V + k]) / n;
    }
  }
  return grad;
}

}  // namespace

std::vector<double> policy_gradient(const TabularPolicy& policy, const RolloutBatch& batch) {
  if (batch.groups.empty()) throw std::invalid_argument("empty rollout batch");
  const auto probs = all_probs(policy);
  return accumulate_gradient(policy, batch, probs,
                             [](const PromptGroup&, const RolloutEntry& e) { return e.advantage; });
}

ClippedGradient clipped_policy_gradient(const TabularPolicy& policy, const RolloutBatch& batch,
                                        double clip_eps) {
  if (batch.groups.empty()) throw std::invalid_argument("empty rollout batch");
  if (!(clip_eps > 0.0)) throw InvalidConfiguration("clip threshold must be positive");
  const auto probs = all_probs(policy);
  std::vector<std::vector<double>> logp(policy.num_categories());
  for (std::size_t c = 0; c < policy.num_categories(); ++c) logp[c] = policy.log_probs(c);

  std::size_t clipped = 0;
  auto weight = [&](const PromptGroup& group, const RolloutEntry& e) {
    const double ratio = std::exp(logp[group.category][e.token] - e.logprob_old);
    if (std::abs(ratio - 1.0) > clip_eps) ++clipped;
    // The min() selects the constant clipped branch, which carries no gradient.
    const bool flat = (e.advantage > 0.0 && ratio > 1.0 + clip_eps) ||
                      (e.advantage < 0.0 && ratio < 1.0 - clip_eps);
    return flat ? 0.0 : e.advantage * ratio;
  };
  ClippedGradient out;
  out.grad = accumulate_gradient(policy, batch, probs, weight);
  out.clip_fraction = static_cast<double>(clipped) / static_cast<double>(batch.num_entries());
  return out;
}

std::vector<std::uint8_t> policy_mask(const TabularPolicy& policy, const RolloutBatch& batch) {
  const std::size_t V = policy.vocab_size();
  std::vector<std::uint8_t> mask(policy.num_categories() * V, 0);
  for (const auto& group : batch.groups)
    std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(group.category * V), V, 1);
  return mask;
}

namespace {
void apply_policy_step(TabularPolicy& policy, const RolloutBatch& batch,
                       const std::vector<double>& grad, GradientOptimizer& optimizer) {
  optimizer.step(policy.all_logits(), grad, /*ascend=*/true, policy_mask(policy, batch));
  for (double x : policy.all_logits())
    if (!std::isfinite(x)) throw std::runtime_error("policy logits became non-finite");
}
}  // namespace

void vanilla_pg_step(TabularPolicy& policy, const RolloutBatch& batch,
                     GradientOptimizer& optimizer) {
  apply_policy_step(policy, batch, policy_gradient(policy, batch), optimizer);
}

double clipped_pg_step(TabularPolicy& policy, const RolloutBatch& batch, const TrainConfig& config,
                       GradientOptimizer& optimizer) {
  if (!config.clip_eps) throw InvalidConfiguration("clipped update needs clip_eps");
  auto clipped = clipped_policy_gradient(policy, batch, *config.clip_eps);
  apply_policy_step(policy, batch, clipped.grad, optimizer);
  return clipped.clip_fraction;
}

// ---------------------------------------------------------------------------
// Value table

std::vector<double> value_gradient(const ValueTable& values, const RolloutBatch& batch) {
  std::vector<double> sum(values.size(), 0.0);
  std::vector<double> count(values.size(), 0.0);
  for (const auto& group : batch.groups) {
    const double psi = value_lookup(values, group.category);
    for (const auto& e : group.entries) {
      sum[group.category] += psi - e.reward;
      count[group.category] += 1.0;
    }
  }
  std::vector<double> grad(values.size(), 0.0);
  for (std::size_t c = 0; c < values.size(); ++c)
    if (count[c] > 0.0) grad[c] = 2.0 * sum[c] / count[c];
  return grad;
}

void value_step(ValueTable& values, const RolloutBatch& batch, const TrainConfig& config,
                GradientOptimizer& optimizer) {
  if (config.algo.kind != Estimator::PPO)
    throw InvalidConfiguration("value_step only applies to PPO");
  const auto grad = value_gradient(values, batch);
  std::vector<std::uint8_t> present(values.size(), 0);
  for (const auto& group : batch.groups) present[group.category] = 1;
  optimizer.step(values.psi, grad, /*ascend=*/false, present);
}

// ---------------------------------------------------------------------------
// Evaluation and the training loop

std::vector<double> category_predictions(const TabularPolicy& policy, Readout readout) {
  std::vector<double> out(policy.num_categories());
  for (std::size_t c = 0; c < out.size(); ++c)
    out[c] = readout == Readout::Mean ? mean_prediction(policy, c) : argmax_prediction(policy, c);
  return out;
}

EvalResult evaluate(const TabularPolicy& policy, const CategoryTable& table,
                    const Dataset& dataset, Readout readout) {
  if (dataset.num_categories() != policy.num_categories() ||
      table.size() != policy.num_categories())
    throw std::invalid_argument("policy, table and dataset disagree on the number of categories");
  const auto per_cat = category_predictions(policy, readout);
  const auto preds = dataset.predictions_from(per_cat);
  const auto labels = dataset.labels();
  EvalResult r;
  r.bins = reliability(preds, labels);
  r.ece = ece(preds, labels);
  r.auroc = auroc(preds, labels);
  r.accuracy = accuracy(preds, labels);
  for (std::size_t c = 0; c < per_cat.size(); ++c)
    r.categories.push_back({c, table.rate(c), mean_prediction(policy, c)});
  return r;
}

TrainResult run(const TrainConfig& config, const CategoryTable& table, const Dataset& train,
                const Dataset& eval) {
  config.validate();
  const std::size_t K = table.size();
  if (train.num_categories() != K || eval.num_categories() != K)
    throw std::invalid_argument("datasets do not match the category table");

  TabularPolicy policy(K, ProbVocab::standard());
  ValueTable values(K);
  GradientOptimizer policy_opt(policy.all_logits().size(),
                               {config.optimizer, config.effective_policy_lr()});
  GradientOptimizer value_opt(K, {OptimizerKind::Adam, config.value_lr});
  const bool ppo = config.algo.kind == Estimator::PPO;

  TrainLog log;
  std::vector<double> step_rewards;
  step_rewards.reserve(config.steps);
  for (std::size_t step = 1; step <= config.steps; ++step) {
    const RolloutBatch batch = collect_rollouts(policy, values, train, config, step);

    double reward_sum = 0.0;
    double abs_adv_sum = 0.0;
    for (const auto& g : batch.groups)
      for (const auto& e : g.entries) {
        reward_sum += e.reward;
        abs_adv_sum += std::abs(e.advantage);
      }
    const double n = static_cast<double>(batch.num_entries());
    step_rewards.push_back(reward_sum / n);

    double clip_sum = 0.0;
    for (std::size_t u = 0; u < config.updates_per_rollout; ++u) {
      if (config.uses_clipping()) {
        const double frac = clipped_pg_step(policy, batch, config, policy_opt);
        if (u > 0) clip_sum += frac;
      } else {
        vanilla_pg_step(policy, batch, policy_opt);
      }
      if (ppo) value_step(values, batch, config, value_opt);
    }

    if (step % config.eval_every == 0 || step == config.steps) {
      const EvalResult ev = evaluate(policy, table, eval, config.readout);
      const double clip_fraction =
          config.updates_per_rollout > 1
              ? clip_sum / static_cast<double>(config.updates_per_rollout - 1)
              : 0.0;
      log.rows.push_back({step, reward_sum / n, ev.ece, ev.auroc, ev.accuracy, abs_adv_sum / n,
                          clip_fraction});
    }
  }

  EvalResult heldout = evaluate(policy, table, eval, config.readout);
  EvalResult on_train = evaluate(policy, table, train, config.readout);
  return {std::move(policy), std::move(values), std::move(log), std::move(step_rewards),
          std::move(heldout), std::move(on_train)};
}

// ---------------------------------------------------------------------------
// CSV

void write_train_log_csv(std::ostream& out, const TrainLog& log) {
  out << "step,mean_reward,ece,auroc,accuracy,mean_abs_advantage,clip_fraction\n";
  for (const auto& r : log.rows)
    out << r.step << ',' << fmt_double(r.mean_reward) << ',' << fmt_double(r.ece) << ','
        << fmt_double(r.auroc) << ',' << fmt_double(r.accuracy) << ','
        << fmt_double(r.mean_abs_advantage) << ',' << fmt_double(r.clip_fraction) << '\n';
}

TrainLog read_train_log_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "step,mean_reward,ece,auroc,accuracy,mean_abs_advantage,clip_fraction")
    throw std::invalid_argument("training log CSV header mismatch");
  TrainLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw std::invalid_argument("malformed training log row: " + line);
    TrainLogRow r;
    r.step = std::stoull(cells[0]);
    r.mean_reward = std::stod(cells[1]);
    r.ece = std::stod(cells[2]);
    r.auroc = std::stod(cells[3]);
    r.accuracy = std::stod(cells[4]);
    r.mean_abs_advantage = std::stod(cells[5]);
    r.clip_fraction = std::stod(cells[6]);
    log.rows.push_back(r);
  }
  return log;
}

void write_categories_csv(std::ostream& out, std::span<const CategoryPrediction> categories) {
  out << "category,true_p,mean_pred\n";
  for (const auto& c : categories)
    out << c.category << ',' << fmt_double(c.true_p) << ',' << fmt_double(c.mean_pred) << '\n';
}

}  // namespace probcal
