#include "probcal/experiment.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "probcal/format.hpp"
#include "probcal/rng.hpp"

namespace probcal {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

nlohmann::json eval_json(const EvalResult& r) {
  return {{"ece", r.ece}, {"auroc", r.auroc}, {"accuracy", r.accuracy}};
}

}  // namespace

World make_world(const WorldConfig& config) {
  CategoryTable table = gen_categories(config.num_categories, config.world_seed);
  Dataset train = gen_dataset(table, config.train_size, mix64(config.world_seed ^ 0x7A11), Split::Train);
  Dataset eval = gen_dataset(table, config.eval_size, mix64(config.world_seed ^ 0xE7A1), Split::Eval);
  return {std::move(table), std::move(train), std::move(eval)};
}

void write_run_artifacts(const fs::path& dir, const TrainConfig& config, const TrainResult& result,
                         const ConfigEcho& echo) {
  fs::create_directories(dir);

  nlohmann::ordered_json metrics;
  metrics["algo"] = std::string(to_string(config.algo.kind));
  metrics["updates_per_rollout"] = config.updates_per_rollout;
  metrics["clip_eps"] = config.clip_eps ? nlohmann::ordered_json(*config.clip_eps) : nullptr;
  metrics["steps"] = config.steps;
  metrics["ece"] = result.heldout.ece;
  metrics["auroc"] = result.heldout.auroc;
  metrics["accuracy"] = result.heldout.accuracy;
  metrics["heldout"] = eval_json(result.heldout);
  metrics["train"] = eval_json(result.train);
  metrics["readout"] = std::string(to_string(config.readout));
  metrics["accuracy_rule"] = "predict 1 iff prediction > 0.5";
  metrics["ece_bins"] = "10 equal-width, left-closed, last bin closed";
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : echo) cfg[k] = v;
  metrics["config"] = std::move(cfg);
  open_out(dir / "metrics.json") << metrics.dump(2) << '\n';

  {
    auto out = open_out(dir / "training_log.csv");
    write_train_log_csv(out, result.log);
  }
  {
    auto out = open_out(dir / "reliability.csv");
    write_reliability_csv(out, result.heldout.bins);
  }
  {
    auto out = open_out(dir / "categories.csv");
    write_categories_csv(out, result.heldout.categories);
  }
  open_out(dir / "policy.json") << checkpoint_to_json(result.policy, result.values) << '\n';
}

RunSummary read_run_summary(const fs::path& dir) {
  std::vector<std::string> missing;
  for (const auto& name : run_artifact_names())
    if (!fs::exists(dir / name)) missing.push_back((dir / name).string());
  if (!missing.empty()) {
    std::string msg = "missing run artifacts:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw MissingArtifacts(msg);
  }
  std::ifstream in(dir / "metrics.json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw MissingArtifacts("unreadable " + (dir / "metrics.json").string() + ": " + e.what());
  }
  RunSummary s;
  s.run_dir = dir.string();
  try {
    s.algo = j.at("algo").get<std::string>();
    s.updates_per_rollout = j.at("updates_per_rollout").get<std::size_t>();
    if (!j.at("clip_eps").is_null()) s.clip_eps = j.at("clip_eps").get<double>();
    s.ece = j.at("ece").get<double>();
    s.auroc = j.at("auroc").get<double>();
    s.accuracy = j.at("accuracy").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw MissingArtifacts("incomplete " + (dir / "metrics.json").string() + ": " + e.what());
  }
  return s;
}

void write_report_csv(std::ostream& out, const std::vector<RunSummary>& runs) {
  out << "algorithm,updates_per_rollout,clip_eps,ece,auroc,accuracy,run_dir\n";
  for (const auto& r : runs)
    out << r.algo << ',' << r.updates_per_rollout << ','
        << (r.clip_eps ? fmt_double(*r.clip_eps) : "NA") << ',' << fmt_double(r.ece) << ','
        << fmt_double(r.auroc) << ',' << fmt_double(r.accuracy) << ',' << r.run_dir << '\n';
}

void write_report_text(std::ostream& out, const std::vector<RunSummary>& runs) {
  out << std::left << std::setw(12) << "Algorithm" << std::right << std::setw(16)
      << "Updates/Rollout" << std::setw(10) << "clip_eps" << std::setw(8) << "ECE"
      << std::setw(8) << "AUROC" << std::setw(10) << "Accuracy" << '\n';
  out << std::string(64, '-') << '\n';
  for (const auto& r : runs) {
    std::ostringstream clip;
    if (r.clip_eps)
      clip << std::fixed << std::setprecision(3) << *r.clip_eps;
    else
      clip << "NA";
    out << std::left << std::setw(12) << r.algo << std::right << std::setw(16)
        << r.updates_per_rollout << std::setw(10) << clip.str() << std::fixed
        << std::setprecision(3) << std::setw(8) << r.ece << std::setw(8) << r.auroc
        << std::setw(10) << r.accuracy << '\n';
    out.unsetf(std::ios::fixed);
  }
}

}  // namespace probcal
