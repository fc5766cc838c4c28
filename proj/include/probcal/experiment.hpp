// Experiment plumbing shared by the CLI, the acceptance suite and the Python
// module: world construction, run artifacts and comparison reports.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "probcal/synthetic_env.hpp"
#include "probcal/trainer.hpp"

namespace probcal {

struct WorldConfig {
  std::size_t num_categories = 20;
  std::size_t train_size = 10000;
  std::size_t eval_size = 10000;
  std::uint64_t world_seed = 7;
};

struct World {
  CategoryTable table;
  Dataset train;
  Dataset eval;
};

/// Category rates and both datasets are drawn from distinct streams derived
/// from world_seed; the held-out set uses a seed distinct from training.
World make_world(const WorldConfig& config);

/// Ordered key/value echo of the effective configuration.
using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

/// Writes metrics.json, training_log.csv, reliability.csv, categories.csv and
/// policy.json into dir (created if needed).
void write_run_artifacts(const std::filesystem::path& dir, const TrainConfig& config,
                         const TrainResult& result, const ConfigEcho& echo);

inline const std::vector<std::string>& run_artifact_names() {
  static const std::vector<std::string> names = {"metrics.json", "training_log.csv",
                                                 "reliability.csv", "categories.csv",
                                                 "policy.json"};
  return names;
}

class MissingArtifacts : public std::runtime_error {
 public:
  explicit MissingArtifacts(const std::string& what) : std::runtime_error(what) {}
};

struct RunSummary {
  std::string run_dir;
  std::string algo;
  std::size_t updates_per_rollout = 1;
  std::optional<double> clip_eps;
  double ece = 0.0;
  double auroc = 0.0;
  double accuracy = 0.0;
};

/// Throws MissingArtifacts naming every absent file.
RunSummary read_run_summary(const std::filesystem::path& dir);

/// algorithm,updates_per_rollout,clip_eps,ece,auroc,accuracy,run_dir
void write_report_csv(std::ostream& out, const std::vector<RunSummary>& runs);
/// Fixed-width table for terminals.
void write_report_text(std::ostream& out, const std::vector<RunSummary>& runs);

}  // namespace probcal
