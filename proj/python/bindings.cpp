#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "probcal/advantage.hpp"
#include "probcal/bias_analysis.hpp"
#include "probcal/errors.hpp"
#include "probcal/experiment.hpp"
#include "probcal/metrics.hpp"
#include "probcal/rng.hpp"
#include "probcal/trainer.hpp"

namespace py = pybind11;
using namespace probcal;

namespace {

py::dict eval_dict(const EvalResult& r) {
  py::dict d;
  d["ece"] = r.ece;
  d["auroc"] = r.auroc;
  d["accuracy"] = r.accuracy;
  py::list cats;
  for (const auto& c : r.categories) {
    py::dict row;
    row["category"] = c.category;
    row["true_p"] = c.true_p;
    row["mean_pred"] = c.mean_pred;
    cats.append(row);
  }
  d["categories"] = cats;
  return d;
}

py::dict curve_dict(const AdvantageCurve& curve) {
  std::vector<double> token, exact;
  std::vector<std::optional<double>> mean, se;
  std::vector<std::size_t> n;
  for (const auto& p : curve.points) {
    token.push_back(p.token_value);
    exact.push_back(p.exact_adv);
    mean.push_back(p.est_mean);
    se.push_back(p.est_stderr);
    n.push_back(p.n_samples);
  }
  py::dict d;
  d["token_value"] = token;
  d["exact_adv"] = exact;
  d["est_mean"] = mean;
  d["est_stderr"] = se;
  d["n_samples"] = n;
  d["estimator"] = std::string(to_string(curve.estimator));
  d["policy_label"] = curve.policy_label;
  return d;
}

}  // namespace

PYBIND11_MODULE(_probcal, m) {
  m.doc() = "Tabular policy-gradient calibration testbed";

  static py::exception<InvalidConfiguration> invalid_config(m, "InvalidConfiguration",
                                                            PyExc_ValueError);
  static py::exception<UndefinedMetric> undefined_metric(m, "UndefinedMetric", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InvalidConfiguration& e) {
      py::set_error(invalid_config, e.what());
    } catch (const UndefinedMetric& e) {
      py::set_error(undefined_metric, e.what());
    }
  });

  py::enum_<RewardRule>(m, "RewardRule")
      .value("LogLikelihood", RewardRule::LogLikelihood)
      .value("Brier", RewardRule::Brier);
  py::enum_<Estimator>(m, "Estimator")
      .value("PPO", Estimator::PPO)
      .value("RLOO", Estimator::RLOO)
      .value("GRPO", Estimator::GRPO)
      .value("GRPO_NoStd", Estimator::GRPO_NoStd);
  py::enum_<Readout>(m, "Readout").value("Mean", Readout::Mean).value("Argmax", Readout::Argmax);

  m.def("philox4x32", &philox4x32, py::arg("counter"), py::arg("key"));
  m.def("gen_categories",
        [](std::size_t k, std::uint64_t seed) {
          auto t = gen_categories(k, seed);
          return std::vector<double>(t.rates().begin(), t.rates().end());
        },
        py::arg("k"), py::arg("seed"));
  m.def("reward", &reward, py::arg("p_hat"), py::arg("answer"),
        py::arg("rule") = RewardRule::LogLikelihood);

  using Vec = std::vector<double>;
  using Labels = std::vector<int>;
  m.def("adv_ppo", [](const Vec& r, double v) { return adv_ppo(r, v); }, py::arg("rewards"),
        py::arg("value"));
  m.def("adv_rloo", [](const Vec& r) { return adv_rloo(r); }, py::arg("rewards"));
  m.def("adv_grpo", [](const Vec& r, double eps) { return adv_grpo(r, eps); }, py::arg("rewards"),
        py::arg("eps") = 1e-4);
  m.def("adv_grpo_nostd", [](const Vec& r) { return adv_grpo_nostd(r); }, py::arg("rewards"));
  m.def("true_advantage",
        [](const std::vector<double>& vocab, const std::vector<double>& dist, double p_true,
           std::size_t token, RewardRule rule) {
          return true_advantage(ProbVocab(vocab), dist, p_true, token, rule);
        },
        py::arg("vocab"), py::arg("dist"), py::arg("p_true"), py::arg("token"),
        py::arg("rule") = RewardRule::LogLikelihood);

  m.def("ece", [](const Vec& p, const Labels& y, std::size_t bins) { return ece(p, y, bins); },
        py::arg("preds"), py::arg("labels"), py::arg("bins") = 10);
  m.def("auroc", [](const Vec& p, const Labels& y) { return auroc(p, y); }, py::arg("preds"),
        py::arg("labels"));
  m.def("accuracy", [](const Vec& p, const Labels& y, double t) { return accuracy(p, y, t); },
        py::arg("preds"), py::arg("labels"), py::arg("threshold") = 0.5);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_property(
          "algo", [](const TrainConfig& c) { return c.algo.kind; },
          [](TrainConfig& c, Estimator e) { c.algo.kind = e; })
      .def_property(
          "grpo_eps", [](const TrainConfig& c) { return c.algo.eps; },
          [](TrainConfig& c, double eps) { c.algo.eps = eps; })
      .def_readwrite("group_size", &TrainConfig::group_size)
      .def_readwrite("prompts_per_rollout", &TrainConfig::prompts_per_rollout)
      .def_readwrite("updates_per_rollout", &TrainConfig::updates_per_rollout)
      .def_readwrite("clip_eps", &TrainConfig::clip_eps)
      .def_readwrite("policy_lr", &TrainConfig::policy_lr)
      .def_readwrite("value_lr", &TrainConfig::value_lr)
      .def_readwrite("steps", &TrainConfig::steps)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("reward", &TrainConfig::reward)
      .def_readwrite("eval_every", &TrainConfig::eval_every)
      .def_readwrite("readout", &TrainConfig::readout)
      .def("validate", &TrainConfig::validate);

  m.def("train",
        [](const TrainConfig& config, std::size_t categories, std::size_t train_size,
           std::size_t eval_size, std::uint64_t world_seed) {
          const World w = make_world({categories, train_size, eval_size, world_seed});
          const TrainResult r = [&] {
            py::gil_scoped_release release;
            return run(config, w.table, w.train, w.eval);
          }();
          py::dict d;
          d["heldout"] = eval_dict(r.heldout);
          d["train"] = eval_dict(r.train);
          py::list log;
          for (const auto& row : r.log.rows) {
            py::dict x;
            x["step"] = row.step;
            x["mean_reward"] = row.mean_reward;
            x["ece"] = row.ece;
            x["auroc"] = row.auroc;
            x["accuracy"] = row.accuracy;
            x["mean_abs_advantage"] = row.mean_abs_advantage;
            x["clip_fraction"] = row.clip_fraction;
            log.append(x);
          }
          d["log"] = log;
          d["step_rewards"] = r.step_rewards;
          d["policy_json"] = checkpoint_to_json(r.policy, r.values);
          return d;
        },
        py::arg("config"), py::arg("categories") = 20, py::arg("train_size") = 10000,
        py::arg("eval_size") = 10000, py::arg("world_seed") = 7);

  m.def("discretize_beta",
        [](double a, double b) { return discretize_beta(a, b).dist; }, py::arg("alpha"),
        py::arg("beta"));
  m.def("exact_advantage_curve",
        [](double a, double b, double p_true, RewardRule rule) {
          return exact_advantage_curve(discretize_beta(a, b), ProbVocab::standard(), p_true, rule);
        },
        py::arg("alpha"), py::arg("beta"), py::arg("p_true") = 0.7,
        py::arg("rule") = RewardRule::LogLikelihood);
  m.def("empirical_advantage_curve",
        [](double a, double b, Estimator kind, double p_true, RewardRule rule, std::size_t g,
           std::size_t n_groups, std::size_t min_count, std::uint64_t seed, unsigned threads,
           double eps) {
          MonteCarloConfig c;
          c.estimator = {kind, eps};
          c.group_size = g;
          c.n_groups = n_groups;
          c.min_count = min_count;
          c.seed = seed;
          c.threads = threads;
          const auto policy = discretize_beta(a, b);
          AdvantageCurve curve;
          {
            py::gil_scoped_release release;
            curve = empirical_advantage_curve(policy, ProbVocab::standard(), p_true, rule, c);
          }
          return curve_dict(curve);
        },
        py::arg("alpha"), py::arg("beta"), py::arg("estimator") = Estimator::GRPO,
        py::arg("p_true") = 0.7, py::arg("rule") = RewardRule::LogLikelihood,
        py::arg("g") = 1000, py::arg("n_groups") = 100000, py::arg("min_count") = 1000,
        py::arg("seed") = 1, py::arg("threads") = 1, py::arg("eps") = 1e-4);
  m.def("sigma_estimates",
        [](double a, double b, RewardRule rule, std::size_t g, std::size_t n_groups,
           std::uint64_t seed, unsigned threads) {
          const auto s = sigma_estimates(discretize_beta(a, b), ProbVocab::standard(), rule, g,
                                         n_groups, seed, threads);
          py::dict d;
          d["sigma0"] = s.sigma0;
          d["sigma1"] = s.sigma1;
          d["stderr0"] = s.stderr0;
          d["stderr1"] = s.stderr1;
          return d;
        },
        py::arg("alpha"), py::arg("beta"), py::arg("rule") = RewardRule::LogLikelihood,
        py::arg("g") = 1000, py::arg("n_groups") = 100000, py::arg("seed") = 1,
        py::arg("threads") = 1);
}
