// Policy-gradient training loop for the tabular policy: rollout collection,
// vanilla and clipped updates, PPO value regression and periodic evaluation.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "probcal/advantage.hpp"
#include "probcal/metrics.hpp"
#include "probcal/policy.hpp"
#include "probcal/synthetic_env.hpp"

namespace probcal {

enum class OptimizerKind { Adam, Sgd };
enum class Readout { Mean, Argmax };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);
std::string_view to_string(Readout readout);
Readout parse_readout(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First-order optimizer over a flat parameter vector with per-parameter
/// state. Parameters whose mask entry is false keep both their value and
/// their moment estimates (lazy updates for rows absent from a batch).
class GradientOptimizer {
 public:
  GradientOptimizer(std::size_t num_params, OptimizerConfig config);

  /// Moves params along +grad (ascent) or -grad (descent).
  void step(std::span<double> params, std::span<const double> grad, bool ascend,
            std::span<const std::uint8_t> mask = {});

  const OptimizerConfig& config() const noexcept { return config_; }

 private:
  OptimizerConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::vector<std::uint32_t> t_;
};

struct TrainConfig {
  EstimatorSpec algo{};
  std::size_t group_size = 2;
  std::size_t prompts_per_rollout = 10000;
  std::size_t updates_per_rollout = 1;
  std::optional<double> clip_eps;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double policy_lr = 0.0;  // 0 selects the default for the optimizer
  double value_lr = 1e-1;
  std::size_t steps = 8000;
  std::uint64_t seed = 1;
  RewardRule reward = RewardRule::LogLikelihood;
  std::size_t eval_every = 10;
  Readout readout = Readout::Argmax;

  /// Throws InvalidConfiguration for unrunnable combinations.
  void validate() const;
  double effective_policy_lr() const;
  /// Clipped updates are used whenever a threshold is configured.
  bool uses_clipping() const { return clip_eps.has_value(); }
};

struct TrainLogRow {
  std::size_t step = 0;
  double mean_reward = 0.0;
  double ece = 0.0;
  double auroc = 0.0;
  double accuracy = 0.0;
  double mean_abs_advantage = 0.0;
  double clip_fraction = 0.0;

  friend bool operator==(const TrainLogRow&, const TrainLogRow&) = default;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
};

struct CategoryPrediction {
  std::size_t category = 0;
  double true_p = 0.0;
  double mean_pred = 0.0;  // policy mean, whatever the metric readout
};

struct EvalResult {
  double ece = 0.0;
  double auroc = 0.0;
  double accuracy = 0.0;
  std::vector<ReliabilityBin> bins;
  std::vector<CategoryPrediction> categories;
};

struct TrainResult {
  TabularPolicy policy;
  ValueTable values;
  TrainLog log;
  /// Mean rollout reward at every step (1-based step i at index i-1).
  std::vector<double> step_rewards;
  EvalResult heldout;
  EvalResult train;
};

/// Prompt indices used at `step`: consecutive slices of per-epoch
/// permutations of the dataset (sampling without replacement per epoch).
std::vector<std::size_t> rollout_prompts(std::size_t dataset_size, std::size_t prompts,
                                         std::uint64_t seed, std::size_t step);

/// Samples G predictions per prompt, scores them against the prompt's
/// observed answer and stores sampling-time log-probabilities and advantages
/// (PPO advantages use the value table as it is at collection time).
RolloutBatch collect_rollouts(const TabularPolicy& policy, const ValueTable& values,
                              const Dataset& dataset, const TrainConfig& config,
                              std::size_t step);

/// Recomputes every group's advantages from its rewards.
void assign_advantages(RolloutBatch& batch, const EstimatorSpec& spec, const ValueTable& values);

/// Empirical mean over entries of A * grad log pi(o); flat K x V.
std::vector<double> policy_gradient(const TabularPolicy& policy, const RolloutBatch& batch);

struct ClippedGradient {
  std::vector<double> grad;
  double clip_fraction = 0.0;  // share of entries with |ratio - 1| > clip_eps
};
/// Gradient of the clipped surrogate mean(min(ratio A, clip(ratio) A)).
ClippedGradient clipped_policy_gradient(const TabularPolicy& policy, const RolloutBatch& batch,
                                        double clip_eps);

/// Rows (categories) that occur in the batch, expanded to a K x V mask.
std::vector<std::uint8_t> policy_mask(const TabularPolicy& policy, const RolloutBatch& batch);

void vanilla_pg_step(TabularPolicy& policy, const RolloutBatch& batch,
                     GradientOptimizer& optimizer);
/// Returns the clip fraction measured before the step.
double clipped_pg_step(TabularPolicy& policy, const RolloutBatch& batch,
                       const TrainConfig& config, GradientOptimizer& optimizer);

/// d/dpsi of the per-category mean squared error between psi_c and the
/// batch rewards of category c; zero for absent categories.
std::vector<double> value_gradient(const ValueTable& values, const RolloutBatch& batch);
void value_step(ValueTable& values, const RolloutBatch& batch, const TrainConfig& config,
                GradientOptimizer& optimizer);

std::vector<double> category_predictions(const TabularPolicy& policy, Readout readout);

EvalResult evaluate(const TabularPolicy& policy, const CategoryTable& table,
                    const Dataset& dataset, Readout readout = Readout::Argmax);

TrainResult run(const TrainConfig& config, const CategoryTable& table, const Dataset& train,
                const Dataset& eval);

/// step,mean_reward,ece,auroc,accuracy,mean_abs_advantage,clip_fraction
void write_train_log_csv(std::ostream& out, const TrainLog& log);
TrainLog read_train_log_csv(std::istream& in);
/// category,true_p,mean_pred
void write_categories_csv(std::ostream& out, std::span<const CategoryPrediction> categories);

}  // namespace probcal
