#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "probcal/bias_analysis.hpp"
#include "probcal/errors.hpp"
#include "probcal/experiment.hpp"
#include "probcal/format.hpp"

namespace probcal::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

unsigned default_threads() {
  if (const char* env = std::getenv("PROBCAL_THREADS")) {
    unsigned n = 0;
    const std::string_view s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec == std::errc() && ptr == s.data() + s.size() && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// Line-oriented key=value file; '#' starts a comment line. Keys are flag
// names without the leading dashes. Values fill only options not given on
// the command line.
void apply_config_file(const std::string& path, CLI::App& app, CLI::App* sub) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::pair<CLI::Option*, std::string>> pending;
  std::vector<CLI::Option*> given;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(std::string_view(text).substr(0, eq));
    const std::string value = trim(std::string_view(text).substr(eq + 1));
    CLI::Option* opt = sub ? sub->get_option_no_throw("--" + key) : nullptr;
    if (!opt) opt = app.get_option_no_throw("--" + key);
    if (!opt || key == "config" || key == "help")
      throw UsageError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    pending.emplace_back(opt, value);
  }
  // Decide command-line precedence before any file values land.
  for (auto& [opt, value] : pending)
    if (opt->count() > 0 && std::find(given.begin(), given.end(), opt) == given.end())
      given.push_back(opt);
  std::vector<CLI::Option*> touched;
  for (auto& [opt, value] : pending) {
    if (std::find(given.begin(), given.end(), opt) != given.end()) continue;
    opt->add_result(value);
    if (std::find(touched.begin(), touched.end(), opt) == touched.end()) touched.push_back(opt);
  }
  for (CLI::Option* opt : touched) {
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError(path + ": " + e.what());
    }
  }
}

template <typename Fn>
auto as_usage(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  inline static const TrainConfig defaults{};
  std::string algo = "grpo";
  double grpo_eps = defaults.algo.eps;
  std::size_t group_size = defaults.group_size;
  std::size_t prompts_per_rollout = defaults.prompts_per_rollout;
  std::size_t updates_per_rollout = defaults.updates_per_rollout;
  double clip_eps = 0.2;
  CLI::Option* clip_opt = nullptr;
  std::string optimizer{to_string(defaults.optimizer)};
  double policy_lr = defaults.policy_lr;
  double value_lr = defaults.value_lr;
  std::size_t steps = defaults.steps;
  std::string reward = "loglik";
  std::size_t eval_every = defaults.eval_every;
  std::string readout{to_string(defaults.readout)};
  WorldConfig world;
  bool table1 = false;
  bool table2 = false;
};

TrainConfig resolve_train(const TrainArgs& a, std::uint64_t seed) {
  TrainConfig c;
  c.algo = {as_usage([&] { return parse_estimator(a.algo); }), a.grpo_eps};
  c.group_size = a.group_size;
  c.prompts_per_rollout = a.prompts_per_rollout;
  c.updates_per_rollout = a.updates_per_rollout;
  if (a.clip_opt->count() > 0) c.clip_eps = a.clip_eps;
  c.optimizer = as_usage([&] { return parse_optimizer(a.optimizer); });
  c.policy_lr = a.policy_lr;
  c.value_lr = a.value_lr;
  c.steps = a.steps;
  c.seed = seed;
  c.reward = as_usage([&] { return parse_reward_rule(a.reward); });
  c.eval_every = a.eval_every;
  c.readout = as_usage([&] { return parse_readout(a.readout); });
  return c;
}

ConfigEcho echo_of(const TrainConfig& c, const WorldConfig& w, const std::string& config_file) {
  return {
      {"algo", std::string(to_string(c.algo.kind))},
      {"grpo-eps", fmt_double(c.algo.eps)},
      {"group-size", std::to_string(c.group_size)},
      {"prompts-per-rollout", std::to_string(c.prompts_per_rollout)},
      {"updates-per-rollout", std::to_string(c.updates_per_rollout)},
      {"clip-eps", c.clip_eps ? fmt_double(*c.clip_eps) : "none"},
      {"optimizer", std::string(to_string(c.optimizer))},
      {"policy-lr", fmt_double(c.effective_policy_lr())},
      {"value-lr", fmt_double(c.value_lr)},
      {"steps", std::to_string(c.steps)},
      {"seed", std::to_string(c.seed)},
      {"reward", std::string(to_string(c.reward))},
      {"eval-every", std::to_string(c.eval_every)},
      {"readout", std::string(to_string(c.readout))},
      {"categories", std::to_string(w.num_categories)},
      {"train-size", std::to_string(w.train_size)},
      {"eval-size", std::to_string(w.eval_size)},
      {"world-seed", std::to_string(w.world_seed)},
      {"config", config_file},
  };
}

struct PlannedRun {
  fs::path dir;
  TrainConfig config;
};

std::string run_name(const TrainConfig& c) {
  std::string name = std::string(to_string(c.algo.kind)) + "_u" + std::to_string(c.updates_per_rollout);
  name += c.clip_eps ? "_clip" + fmt_double(*c.clip_eps) : "_noclip";
  return name;
}

std::vector<PlannedRun> plan_train(const TrainArgs& a, const TrainConfig& base, const fs::path& out) {
  if (a.table1 && a.table2) throw UsageError("--table1 and --table2 are mutually exclusive");
  const Estimator algos[] = {Estimator::GRPO, Estimator::GRPO_NoStd, Estimator::RLOO,
                             Estimator::PPO};
  std::vector<PlannedRun> runs;
  if (a.table1) {
    for (Estimator e : algos) {
      TrainConfig c = base;
      c.algo.kind = e;
      c.updates_per_rollout = 1;
      c.clip_eps.reset();
      runs.push_back({out / std::string(to_string(e)), c});
    }
  } else if (a.table2) {
    struct Schedule {
      std::size_t updates;
      std::optional<double> clip;
    };
    const Schedule schedules[] = {{1, std::nullopt}, {10, 0.2}, {10, 0.001}};
    for (Estimator e : algos)
      for (const auto& s : schedules) {
        TrainConfig c = base;
        c.algo.kind = e;
        c.updates_per_rollout = s.updates;
        c.clip_eps = s.clip;
        runs.push_back({out / run_name(c), c});
      }
  } else {
    runs.push_back({out, base});
  }
  for (const auto& r : runs) {
    try {
      r.config.validate();
    } catch (const InvalidConfiguration& e) {
      throw UsageError(e.what());
    }
  }
  return runs;
}

void write_report_files(const fs::path& out, const std::vector<RunSummary>& runs) {
  fs::create_directories(out);
  std::ofstream csv(out / "report.csv", std::ios::binary);
  write_report_csv(csv, runs);
  std::ofstream txt(out / "report.txt", std::ios::binary);
  write_report_text(txt, runs);
  if (!csv || !txt) throw std::runtime_error("cannot write report into " + out.string());
}

int exec_train(const std::vector<PlannedRun>& runs, const WorldConfig& world_cfg,
               const std::string& config_file, const fs::path& out, bool preset,
               std::ostream& os) {
  const World world = make_world(world_cfg);
  std::vector<RunSummary> summaries;
  for (const auto& r : runs) {
    const TrainResult result = run(r.config, world.table, world.train, world.eval);
    write_run_artifacts(r.dir, r.config, result, echo_of(r.config, world_cfg, config_file));
    summaries.push_back(read_run_summary(r.dir));
    os << r.dir.string() << ": ece=" << fmt_double(result.heldout.ece)
       << " auroc=" << fmt_double(result.heldout.auroc)
       << " accuracy=" << fmt_double(result.heldout.accuracy) << '\n';
  }
  if (preset) {
    write_report_files(out, summaries);
    write_report_text(os, summaries);
  }
  return 0;
}

// ---- bias -----------------------------------------------------------------

struct BiasArgs {
  std::vector<std::string> policies = {"beta:1,1", "beta:5.7,3", "beta:50,1"};
  std::vector<std::string> estimators = {"grpo", "grpo-nostd"};
  std::vector<std::string> rewards = {"loglik"};
  double p_true = 0.7;
  std::size_t g = 1000;
  std::size_t samples = 100000;
  std::size_t min_count = 1000;
  double eps = 1e-4;
};

double parse_positive(std::string_view text, const std::string& spec) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !(v > 0.0) || !std::isfinite(v))
    throw UsageError("malformed --policy '" + spec + "' (expected beta:a,b with a,b > 0)");
  return v;
}

FixedPolicy parse_policy(const std::string& spec) {
  constexpr std::string_view prefix = "beta:";
  const std::string_view s(spec);
  if (s.substr(0, prefix.size()) != prefix)
    throw UsageError("malformed --policy '" + spec + "' (expected beta:a,b with a,b > 0)");
  const std::string_view body = s.substr(prefix.size());
  const auto comma = body.find(',');
  if (comma == std::string_view::npos)
    throw UsageError("malformed --policy '" + spec + "' (expected beta:a,b with a,b > 0)");
  const double a = parse_positive(body.substr(0, comma), spec);
  const double b = parse_positive(body.substr(comma + 1), spec);
  return discretize_beta(a, b);
}

struct BiasPlan {
  std::vector<FixedPolicy> policies;
  std::vector<Estimator> estimators;
  std::vector<RewardRule> rewards;
};

BiasPlan plan_bias(const BiasArgs& a) {
  BiasPlan plan;
  for (const auto& p : a.policies) plan.policies.push_back(parse_policy(p));
  for (const auto& e : a.estimators) {
    const Estimator kind = as_usage([&] { return parse_estimator(e); });
    if (kind != Estimator::GRPO && kind != Estimator::GRPO_NoStd)
      throw UsageError("--estimator must be grpo or grpo-nostd");
    plan.estimators.push_back(kind);
  }
  for (const auto& r : a.rewards) plan.rewards.push_back(as_usage([&] { return parse_reward_rule(r); }));
  if (!(a.p_true >= 0.0 && a.p_true <= 1.0)) throw UsageError("--p-true must lie in [0,1]");
  if (a.g < 2) throw UsageError("--g must be at least 2");
  if (a.samples < 1) throw UsageError("--samples must be positive");
  if (!(a.eps >= 0.0)) throw UsageError("--eps must be nonnegative");
  return plan;
}

int exec_bias(const BiasArgs& a, const BiasPlan& plan, std::uint64_t seed, unsigned threads,
              const fs::path& out, std::ostream& os) {
  fs::create_directories(out);
  std::ofstream curves(out / "advantage_curves.csv", std::ios::binary);
  std::ofstream sigmas(out / "sigmas.csv", std::ios::binary);
  std::ofstream approx(out / "approx_curves.csv", std::ios::binary);
  if (!curves || !sigmas || !approx) throw std::runtime_error("cannot write into " + out.string());
  write_curve_csv_header(curves);
  write_sigma_csv_header(sigmas);
  approx << "token_value,exact_adv,approx_adv,policy_label,rule\n";

  const ProbVocab& vocab = ProbVocab::standard();
  for (RewardRule rule : plan.rewards) {
    for (const auto& policy : plan.policies) {
      const SigmaPair sigma = sigma_estimates(policy, vocab, rule, a.g, a.samples, seed, threads);
      write_sigma_csv_row(sigmas, policy.label, rule, sigma);
      const auto exact = exact_advantage_curve(policy, vocab, a.p_true, rule);
      const auto approx_adv = approx_grpo_advantage(policy, vocab, a.p_true, rule, sigma, a.eps);
      for (std::size_t k = 0; k < vocab.size(); ++k)
        approx << fmt_double(vocab[k]) << ',' << fmt_double(exact[k]) << ','
               << fmt_double(approx_adv[k]) << ",\"" << policy.label << "\"," << to_string(rule)
               << '\n';
      for (Estimator kind : plan.estimators) {
        MonteCarloConfig mc;
        mc.estimator = {kind, a.eps};
        mc.group_size = a.g;
        mc.n_groups = a.samples;
        mc.min_count = a.min_count;
        mc.seed = seed;
        mc.threads = threads;
        const AdvantageCurve curve = empirical_advantage_curve(policy, vocab, a.p_true, rule, mc);
        write_curve_csv_rows(curves, curve);
        os << policy.label << ' ' << to_string(kind) << ' ' << to_string(rule) << ": done\n";
      }
    }
  }
  if (!curves || !sigmas || !approx) throw std::runtime_error("write failed in " + out.string());
  return 0;
}

// ---- report ---------------------------------------------------------------

int exec_report(const std::vector<std::string>& dirs, const std::string& out, std::ostream& os) {
  std::vector<RunSummary> runs;
  for (const auto& d : dirs) runs.push_back(read_run_summary(d));
  if (!out.empty()) write_report_files(out, runs);
  write_report_text(os, runs);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calibration testbed for policy-gradient probability prediction", "probcal"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  std::string out_dir;
  std::string config_file;
  unsigned threads = default_threads();
  app.add_option("--seed", seed, "Seed for training or Monte-Carlo sampling")->capture_default_str();
  app.add_option("--out", out_dir, "Output directory (train: run, bias: bias)");
  app.add_option("--config", config_file, "key=value file; command-line flags take precedence");
  app.add_option("--threads", threads, "Worker threads (default from PROBCAL_THREADS)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  TrainArgs ta;
  CLI::App* train = app.add_subcommand("train", "Train a tabular policy and write run artifacts");
  train->add_option("--algo", ta.algo, "ppo | rloo | grpo | grpo-nostd")->capture_default_str();
  train->add_option("--grpo-eps", ta.grpo_eps, "GRPO denominator stabilizer")->capture_default_str();
  train->add_option("--group-size", ta.group_size, "Predictions per prompt (G)")->capture_default_str();
  train->add_option("--prompts-per-rollout", ta.prompts_per_rollout)->capture_default_str();
  train->add_option("--updates-per-rollout", ta.updates_per_rollout)->capture_default_str();
  ta.clip_opt = train->add_option("--clip-eps", ta.clip_eps, "Clipping threshold (enables clipped updates)");
  train->add_option("--optimizer", ta.optimizer, "adam | sgd")->capture_default_str();
  train->add_option("--policy-lr", ta.policy_lr, "0 selects the optimizer default");
  train->add_option("--value-lr", ta.value_lr)->capture_default_str();
  train->add_option("--steps", ta.steps)->capture_default_str();
  train->add_option("--reward", ta.reward, "loglik | brier")->capture_default_str();
  train->add_option("--eval-every", ta.eval_every)->capture_default_str();
  train->add_option("--readout", ta.readout, "mean | argmax")->capture_default_str();
  train->add_option("--categories", ta.world.num_categories)->capture_default_str();
  train->add_option("--train-size", ta.world.train_size)->capture_default_str();
  train->add_option("--eval-size", ta.world.eval_size)->capture_default_str();
  train->add_option("--world-seed", ta.world.world_seed)->capture_default_str();
  train->add_flag("--table1", ta.table1, "Run all four algorithms on one world and report");
  train->add_flag("--table2", ta.table2, "Run the 12-run update/clipping grid and report");

  BiasArgs ba;
  CLI::App* bias = app.add_subcommand("bias", "Advantage-bias analysis under fixed Beta policies");
  bias->add_option("--policy", ba.policies, "beta:a,b (repeatable)")->capture_default_str();
  bias->add_option("--estimator", ba.estimators, "grpo | grpo-nostd (repeatable)")->capture_default_str();
  bias->add_option("--reward", ba.rewards, "loglik | brier (repeatable)")->capture_default_str();
  bias->add_option("--p-true", ba.p_true)->capture_default_str();
  bias->add_option("--g", ba.g, "Group size")->capture_default_str();
  bias->add_option("--samples", ba.samples, "Number of sampled groups")->capture_default_str();
  bias->add_option("--min-count", ba.min_count, "Minimum occurrences for a reported token")
      ->capture_default_str();
  bias->add_option("--eps", ba.eps, "GRPO denominator stabilizer")->capture_default_str();

  std::vector<std::string> report_dirs;
  CLI::App* report = app.add_subcommand("report", "Combine run directories into a comparison table");
  report->add_option("runs", report_dirs, "Run directories");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  CLI::App* active = train->parsed() ? train : bias->parsed() ? bias : report;

  // Usage phase: everything that can be rejected before work starts.
  std::vector<PlannedRun> planned;
  BiasPlan bias_plan;
  try {
    if (!config_file.empty()) apply_config_file(config_file, app, active);
    if (active == train) {
      const TrainConfig base = resolve_train(ta, seed);
      planned = plan_train(ta, base, out_dir.empty() ? "run" : out_dir);
    } else if (active == bias) {
      bias_plan = plan_bias(ba);
    } else if (report_dirs.empty()) {
      throw UsageError("report needs at least one run directory");
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n' << active->help();
    return 2;
  }

  try {
    if (active == train)
      return exec_train(planned, ta.world, config_file, out_dir.empty() ? "run" : out_dir,
                        ta.table1 || ta.table2, out);
    if (active == bias) return exec_bias(ba, bias_plan, seed, threads, out_dir.empty() ? "bias" : out_dir, out);
    return exec_report(report_dirs, out_dir, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace probcal::cli
