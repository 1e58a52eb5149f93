#include "iqlearn/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "iqlearn/baselines.hpp"
#include "iqlearn/io.hpp"
#include "iqlearn/math.hpp"
#include "iqlearn/parallel.hpp"
#include "iqlearn/qiq.hpp"
#include "iqlearn/simgen.hpp"
#include "iqlearn/tiq.hpp"
#include "iqlearn/value_oracle.hpp"

namespace iqlearn {

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// option plumbing
// ---------------------------------------------------------------------------

// JSON config file loaded with --config; file values win over flags, with
// a warning when both were given and disagree.
struct ConfigFile {
  ordered_json j;
  bool loaded = false;

  void load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw DataError("cannot parse config file " + path + ": " + e.what());
    }
    loaded = true;
  }

  template <typename T>
  void apply(const char* key, T& value, const CLI::Option* opt) {
    if (!loaded || !j.contains(key)) return;
    T file_value = j.at(key).get<T>();
    if (opt != nullptr && opt->count() > 0 && file_value != value)
      std::cerr << "warning: config file overrides --" << key << "\n";
    value = file_value;
  }
};

std::uint64_t env_seed(std::uint64_t fallback) {
  if (const char* s = std::getenv("IQLEARN_SEED"))
    return static_cast<std::uint64_t>(std::strtoull(s, nullptr, 10));
  return fallback;
}

unsigned env_threads() {
  if (const char* s = std::getenv("IQLEARN_THREADS"))
    return static_cast<unsigned>(std::strtoul(s, nullptr, 10));
  return 0;
}

CdfKind parse_cdf(const std::string& s) {
  if (s == "normal") return CdfKind::NormalScale;
  if (s == "empirical") return CdfKind::Empirical;
  throw DataError("unknown --cdf value '" + s + "' (normal|empirical)");
}

JointKind parse_joint(const std::string& s) {
  if (s == "copula") return JointKind::GaussianCopula;
  if (s == "kde") return JointKind::BivariateKde;
  throw DataError("unknown --joint value '" + s + "' (copula|kde)");
}

GenVariant parse_variant(const std::string& s) {
  if (s == "gaussian") return GenVariant::Gaussian;
  if (s == "chisq") return GenVariant::ChisqSkew;
  throw DataError("unknown --variant value '" + s + "' (gaussian|chisq)");
}

// Options shared by the fit-* commands.
struct FitOpts {
  std::string data_path;
  std::string cdf = "normal";
  std::string joint = "copula";
  int mc_draws = 10000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string features = "default";  // default | stard
  std::string config_path;
  std::string out_json;
  std::string decisions_path;

  ConfigFile config;

  void add_common(CLI::App* cmd, bool needs_joint) {
    cmd->add_option("--data", data_path, "input dataset CSV")->required();
    if (needs_joint) {
      cmd->add_option("--cdf", cdf, "error CDF estimator: normal|empirical");
      cmd->add_option("--joint", joint, "dependence model: copula|kde");
      cmd->add_option("--mc-draws", mc_draws, "Monte Carlo draws per decision");
      cmd->add_option("--seed", seed, "Monte Carlo seed");
    }
    cmd->add_option("--features", features,
                    "feature preset: default (h2 = 1,x2) or stard (adds a1)");
    cmd->add_option("--threads", threads, "worker thread cap (0 = hardware)");
    cmd->add_option("--config", config_path, "JSON config file (wins over flags)");
    cmd->add_option("--out-json", out_json, "model summary output path");
    cmd->add_option("--decisions", decisions_path, "per-patient decision CSV path");
  }

  void resolve(CLI::App* cmd, bool needs_joint) {
    if (!config_path.empty()) config.load(config_path);
    config.apply("data", data_path, cmd->get_option_no_throw("--data"));
    if (needs_joint) {
      config.apply("cdf", cdf, cmd->get_option_no_throw("--cdf"));
      config.apply("joint", joint, cmd->get_option_no_throw("--joint"));
      config.apply("mc_draws", mc_draws, cmd->get_option_no_throw("--mc-draws"));
      if (cmd->get_option_no_throw("--seed")->count() == 0) seed = env_seed(seed);
      config.apply("seed", seed, cmd->get_option_no_throw("--seed"));
    }
    config.apply("features", features, cmd->get_option_no_throw("--features"));
    if (cmd->get_option_no_throw("--threads")->count() == 0) {
      const unsigned t = env_threads();
      if (t) threads = t;
    }
    config.apply("threads", threads, cmd->get_option_no_throw("--threads"));
    config.apply("out_json", out_json, cmd->get_option_no_throw("--out-json"));
    config.apply("decisions", decisions_path,
                 cmd->get_option_no_throw("--decisions"));
    set_max_threads(threads);
  }

  FitConfig fit_config(const Dataset& data) const {
    FitConfig fc = FitConfig::defaults(data);
    if (features == "stard") {
      fc.stage2.main.include_a1 = true;
      fc.stage2.interaction.include_a1 = true;
    } else if (features != "default") {
      throw DataError("unknown --features preset '" + features + "'");
    }
    if (config.loaded) {
      if (config.j.contains("h20"))
        fc.stage2.main = feature_map_from_json(config.j["h20"]);
      if (config.j.contains("h21"))
        fc.stage2.interaction = feature_map_from_json(config.j["h21"]);
      if (config.j.contains("h1_main"))
        fc.stage1.main = feature_map_from_json(config.j["h1_main"]);
      if (config.j.contains("h1_ixn"))
        fc.stage1.interaction = feature_map_from_json(config.j["h1_ixn"]);
    }
    fc.cdf = parse_cdf(cdf);
    fc.joint = parse_joint(joint);
    fc.mc = McConfig{mc_draws, seed};
    return fc;
  }
};

ordered_json meta_json(const std::string& command, const ordered_json& config) {
  ordered_json meta;
  meta["tool"] = "iqlearn";
  meta["version"] = kVersion;
  meta["command"] = command;
  meta["config"] = config;
  const std::string dump = config.dump();
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(dump.data(), dump.size())));
  meta["config_hash"] = buf;
  return meta;
}

std::vector<std::string> meta_lines(const ordered_json& meta) {
  std::vector<std::string> lines;
  lines.push_back("tool: iqlearn " + std::string(kVersion));
  lines.push_back("command: " + meta["command"].get<std::string>());
  lines.push_back("config: " + meta["config"].dump());
  lines.push_back("config_hash: " + meta["config_hash"].get<std::string>());
  return lines;
}

void emit_json(const ordered_json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  out << j.dump(2) << "\n";
}

ordered_json regime_pi2_json(const FittedStage2& fit) {
  ordered_json j;
  j["type"] = "linear";
  j["coef"] = std::vector<double>(fit.beta21.data(),
                                  fit.beta21.data() + fit.beta21.size());
  j["features"] = feature_map_to_json(fit.spec.interaction);
  return j;
}

void write_decisions_csv(const std::string& path, const ordered_json& meta,
                         const Dataset& data, const std::vector<int>& pi1,
                         const std::vector<double>& stat,
                         const std::vector<double>& stat_se,
                         const std::vector<int>& pi2) {
  Table t;
  t.meta = meta_lines(meta);
  t.columns = {"row"};
  for (int j = 1; j <= data.p1(); ++j)
    t.columns.push_back("x1_" + std::to_string(j));
  t.columns.insert(t.columns.end(), {"pi1", "d_hat", "mc_se", "pi2"});
  for (int i = 0; i < data.n(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (int j = 0; j < data.p1(); ++j)
      row.push_back(format_g9(data.row(i).x1(j)));
    row.push_back(std::to_string(pi1[static_cast<size_t>(i)]));
    row.push_back(format_g9(stat[static_cast<size_t>(i)]));
    row.push_back(format_g9(stat_se[static_cast<size_t>(i)]));
    row.push_back(std::to_string(pi2[static_cast<size_t>(i)]));
    t.rows.push_back(std::move(row));
  }
  write_table(path, t);
}

// Second-stage recommendations at the observed histories.
std::vector<int> pi2_column(const Dataset& data, const Regime& regime) {
  std::vector<int> out(static_cast<size_t>(data.n()));
  parallel_for(out.size(), [&](size_t i) {
    const auto& r = data.row(static_cast<int>(i));
    out[i] = regime.pi2(r.x1, r.a1, r.x2);
  });
  return out;
}

// ---------------------------------------------------------------------------
// fit-* commands
// ---------------------------------------------------------------------------

int run_fit_tiq(const FitOpts& opts, double lambda,
                const std::string& compare_path, const ordered_json& config_echo) {
  const Dataset data = read_dataset_csv(opts.data_path);
  const FitConfig fc = opts.fit_config(data);
  auto parts = fit_components(data, fc);
  const TiqFit fit = fit_tiq(parts, lambda);
  const ordered_json meta = meta_json("fit-tiq", config_echo);

  const auto n = static_cast<size_t>(data.n());
  std::vector<int> pi1(n);
  std::vector<double> dh(n), se(n);
  parallel_for(n, [&](size_t i) {
    const TiqDecision d =
        tiq_decide(*parts, data.row(static_cast<int>(i)).x1, lambda);
    pi1[i] = d.action;
    dh[i] = d.d_hat;
    se[i] = d.mc_se;
  });
  const std::vector<int> pi2 = pi2_column(data, fit.regime);

  ordered_json out;
  out["meta"] = meta;
  out["n"] = data.n();
  out["lambda"] = lambda;
  out["stage2"] = stage2_to_json(*parts->stage2);
  out["cdf"] = cdf_to_json(parts->cdf);
  out["joint"] = joint_to_json(parts->joint);
  out["regime"]["pi2"] = regime_pi2_json(*parts->stage2);
  out["regime"]["pi1"] = {{"type", "mc-threshold"},
                          {"lambda", lambda},
                          {"mc_draws", fc.mc.draws},
                          {"seed", fc.mc.seed}};
  emit_json(out, opts.out_json);

  if (!opts.decisions_path.empty())
    write_decisions_csv(opts.decisions_path, meta, data, pi1, dh, se, pi2);

  if (!compare_path.empty()) {
    const auto rows =
        compare_mean_vs_tiq(*parts, parts->train_x1, lambda);
    Table t;
    t.meta = meta_lines(meta);
    t.columns = {"row", "mean_action", "tiq_action", "disagree"};
    for (size_t i = 0; i < rows.size(); ++i)
      t.rows.push_back({std::to_string(i), std::to_string(rows[i].mean_action),
                        std::to_string(rows[i].tiq_action),
                        std::to_string(rows[i].disagree ? 1 : 0)});
    write_table(compare_path, t);
  }
  return 0;
}

int run_fit_qiq(const FitOpts& opts, double tau, const QiqOptions& qopts,
                const ordered_json& config_echo) {
  const Dataset data = read_dataset_csv(opts.data_path);
  const FitConfig fc = opts.fit_config(data);
  auto parts = fit_components(data, fc);
  const QiqFit fit = fit_qiq(parts, tau, qopts);
  const ordered_json meta = meta_json("fit-qiq", config_echo);

  const double threshold = fit.model.rule_threshold();
  const auto n = static_cast<size_t>(data.n());
  std::vector<int> pi1(n);
  std::vector<double> dh(n), se(n);
  parallel_for(n, [&](size_t i) {
    const TiqDecision d =
        tiq_decide(*parts, data.row(static_cast<int>(i)).x1, threshold);
    pi1[i] = d.action;
    dh[i] = d.d_hat;
    se[i] = d.mc_se;
  });
  const std::vector<int> pi2 = pi2_column(data, fit.regime);

  ordered_json out;
  out["meta"] = meta;
  out["n"] = data.n();
  out["tau"] = tau;
  out["y_star"] = fit.model.y_star_hat();
  out["f_at_y_star"] = fit.model.f_at_y_star();
  out["branch"] = fit.model.fallback_branch() ? "fallback" : "direct";
  out["delta"] = qopts.delta;
  out["rule_threshold"] = threshold;
  out["stage2"] = stage2_to_json(*parts->stage2);
  out["cdf"] = cdf_to_json(parts->cdf);
  out["joint"] = joint_to_json(parts->joint);
  out["regime"]["pi2"] = regime_pi2_json(*parts->stage2);
  out["regime"]["pi1"] = {{"type", "mc-threshold"},
                          {"lambda", threshold},
                          {"mc_draws", fc.mc.draws},
                          {"seed", fc.mc.seed}};
  emit_json(out, opts.out_json);
  if (!opts.decisions_path.empty())
    write_decisions_csv(opts.decisions_path, meta, data, pi1, dh, se, pi2);
  return 0;
}

int run_fit_q(const FitOpts& opts, const ordered_json& config_echo) {
  const Dataset data = read_dataset_csv(opts.data_path);
  const FitConfig fc = opts.fit_config(data);
  const QLearnFit fit = fit_qlearning(data, fc.stage2, fc.stage1);
  const ordered_json meta = meta_json("fit-q", config_echo);

  const auto n = static_cast<size_t>(data.n());
  std::vector<int> pi1(n);
  std::vector<double> dh(n), se(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const auto& x1 = data.row(static_cast<int>(i)).x1;
    dh[i] = fit.stage1.interaction.build(x1).dot(fit.beta11);
    pi1[i] = sgn(dh[i]);
  }
  const std::vector<int> pi2 = pi2_column(data, fit.regime);

  ordered_json out;
  out["meta"] = meta;
  out["n"] = data.n();
  out["stage2"] = stage2_to_json(*fit.stage2);
  out["stage1"]["main"] = std::vector<double>(
      fit.beta10.data(), fit.beta10.data() + fit.beta10.size());
  out["stage1"]["interaction"] = std::vector<double>(
      fit.beta11.data(), fit.beta11.data() + fit.beta11.size());
  out["regime"]["pi2"] = regime_pi2_json(*fit.stage2);
  out["regime"]["pi1"] = {
      {"type", "linear"},
      {"coef", std::vector<double>(fit.beta11.data(),
                                   fit.beta11.data() + fit.beta11.size())},
      {"features", feature_map_to_json(fit.stage1.interaction)}};
  emit_json(out, opts.out_json);
  if (!opts.decisions_path.empty())
    write_decisions_csv(opts.decisions_path, meta, data, pi1, dh, se, pi2);
  return 0;
}

int run_fit_iq(const FitOpts& opts, const ordered_json& config_echo) {
  const Dataset data = read_dataset_csv(opts.data_path);
  const FitConfig fc = opts.fit_config(data);
  auto parts = fit_components(data, fc);
  const Regime regime = fit_iqlearning(parts);
  const ordered_json meta = meta_json("fit-iq", config_echo);

  const auto n = static_cast<size_t>(data.n());
  std::vector<int> pi1(n);
  std::vector<double> dh(n), se(n, 0.0);
  parallel_for(n, [&](size_t i) {
    const IqDecision d = iq_decide(*parts, data.row(static_cast<int>(i)).x1);
    pi1[i] = d.action;
    dh[i] = d.d_mean;
  });
  const std::vector<int> pi2 = pi2_column(data, regime);

  ordered_json out;
  out["meta"] = meta;
  out["n"] = data.n();
  out["stage2"] = stage2_to_json(*parts->stage2);
  out["joint"] = joint_to_json(parts->joint);
  out["regime"]["pi2"] = regime_pi2_json(*parts->stage2);
  out["regime"]["pi1"] = {{"type", "mc-mean"},
                          {"mc_draws", fc.mc.draws},
                          {"seed", fc.mc.seed}};
  emit_json(out, opts.out_json);
  if (!opts.decisions_path.empty())
    write_decisions_csv(opts.decisions_path, meta, data, pi1, dh, se, pi2);
  return 0;
}

int run_fit_binq(const FitOpts& opts, double lambda,
                 const ordered_json& config_echo) {
  const Dataset data = read_dataset_csv(opts.data_path);
  const FitConfig fc = opts.fit_config(data);
  const BinaryQFit fit = fit_binary_q(data, lambda, fc.stage2, fc.stage1);
  const ordered_json meta = meta_json("fit-binq", config_echo);

  const auto n = static_cast<size_t>(data.n());
  std::vector<int> pi1(n);
  std::vector<double> dh(n), se(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const auto& x1 = data.row(static_cast<int>(i)).x1;
    dh[i] = fit.stage1_spec.interaction.build(x1).dot(fit.beta11);
    pi1[i] = sgn(dh[i]);
  }
  const std::vector<int> pi2 = pi2_column(data, fit.regime);

  ordered_json out;
  out["meta"] = meta;
  out["n"] = data.n();
  out["lambda"] = lambda;
  out["newton_iters"] = fit.newton_iters;
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  out["stage2"]["main"] = vec(fit.beta20);
  out["stage2"]["interaction"] = vec(fit.beta21);
  out["stage1"]["main"] = vec(fit.beta10);
  out["stage1"]["interaction"] = vec(fit.beta11);
  out["regime"]["pi2"] = {{"type", "linear"},
                          {"coef", vec(fit.beta21)},
                          {"features", feature_map_to_json(fit.stage2_spec.interaction)}};
  out["regime"]["pi1"] = {{"type", "linear"},
                          {"coef", vec(fit.beta11)},
                          {"features", feature_map_to_json(fit.stage1_spec.interaction)}};
  emit_json(out, opts.out_json);
  if (!opts.decisions_path.empty())
    write_decisions_csv(opts.decisions_path, meta, data, pi1, dh, se, pi2);
  return 0;
}

// ---------------------------------------------------------------------------
// simulate / value / oracle / diagnose
// ---------------------------------------------------------------------------

int run_simulate(const ExperimentConfig& cfg, const std::string& out_path,
                 const std::string& summary_path,
                 const ordered_json& config_echo) {
  const ExperimentResult result = run_experiment(cfg);
  const bool prob_mode = !cfg.lambdas.empty();
  const ordered_json meta = meta_json("simulate", config_echo);

  Table t;
  t.meta = meta_lines(meta);
  t.meta.push_back("failures: " + std::to_string(result.failures.size()));
  t.columns = {"rep", "estimator", "C", "level_type", "level", "metric",
               "value", "n_consistent"};
  for (const auto& r : result.rows)
    t.rows.push_back({std::to_string(r.rep), estimator_name(r.estimator),
                      format_g9(r.C), prob_mode ? "lambda" : "tau",
                      format_g9(r.level), prob_mode ? "prob" : "quantile",
                      format_g9(r.value), std::to_string(r.n_consistent)});
  write_table(out_path, t);

  if (!result.failures.empty()) {
    Table f;
    f.meta = meta_lines(meta);
    f.columns = {"rep", "estimator", "C", "level", "error"};
    for (const auto& r : result.failures) {
      std::string what = r.what;
      for (auto& ch : what)
        if (ch == ',' || ch == '\n') ch = ';';
      f.rows.push_back({std::to_string(r.rep), estimator_name(r.estimator),
                        format_g9(r.C), format_g9(r.level), what});
    }
    write_table(out_path + ".failures.csv", f);
    std::cerr << "warning: " << result.failures.size()
              << " replication fit(s) failed and were excluded; see "
              << out_path + ".failures.csv" << "\n";
  }

  if (!summary_path.empty()) {
    Table s;
    s.meta = meta_lines(meta);
    s.columns = {"estimator", "C", "level", "mean", "se", "reps"};
    for (const auto& r : result.summary())
      s.rows.push_back({estimator_name(r.estimator), format_g9(r.C),
                        format_g9(r.level), format_g9(r.mean), format_g9(r.se),
                        std::to_string(r.reps)});
    write_table(summary_path, s);
  }
  return 0;
}

// Regime from a JSON rule file or a decisions CSV (row-aligned pi1/pi2).
ValueEstimate value_from_files(const std::string& data_path,
                               const std::string& regime_path, double lambda) {
  const Dataset data = read_dataset_csv(data_path);
  const bool is_csv = regime_path.size() >= 4 &&
                      regime_path.substr(regime_path.size() - 4) == ".csv";
  if (!is_csv) return ipw_value(data, regime_from_json_file(regime_path), lambda);
  const Table t = read_table(regime_path);
  int c_pi1 = -1, c_pi2 = -1;
  for (size_t c = 0; c < t.columns.size(); ++c) {
    if (t.columns[c] == "pi1") c_pi1 = static_cast<int>(c);
    if (t.columns[c] == "pi2") c_pi2 = static_cast<int>(c);
  }
  if (c_pi1 < 0 || c_pi2 < 0)
    throw DataError("decisions CSV must have pi1 and pi2 columns");
  if (t.rows.size() != static_cast<size_t>(data.n()))
    throw DataError("decisions CSV row count does not match the dataset");
  std::vector<int> pi1, pi2;
  for (const auto& row : t.rows) {
    pi1.push_back(std::stoi(row[static_cast<size_t>(c_pi1)]));
    pi2.push_back(std::stoi(row[static_cast<size_t>(c_pi2)]));
  }
  return ipw_value_rows(data, pi1, pi2, lambda);
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
  CLI::App app{"two-stage treatment regimes for threshold probabilities and quantiles"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // fit commands -------------------------------------------------------
  FitOpts tiq_opts, qiq_opts, q_opts, iq_opts, binq_opts;
  double lambda = 0.0, tau = 0.5, binq_lambda = 0.0;
  std::string compare_path;
  QiqOptions qiq_solver;

  auto* cmd_tiq = app.add_subcommand("fit-tiq", "threshold-optimal regime");
  tiq_opts.add_common(cmd_tiq, true);
  cmd_tiq->add_option("--lambda", lambda, "outcome threshold")->required();
  cmd_tiq->add_option("--compare-mean", compare_path,
                      "CSV of mean-optimal vs threshold-optimal decisions");

  auto* cmd_qiq = app.add_subcommand("fit-qiq", "quantile-optimal regime");
  qiq_opts.add_common(cmd_qiq, true);
  cmd_qiq->add_option("--tau", tau, "target quantile in (0,1)")->required();
  cmd_qiq->add_option("--delta", qiq_solver.delta, "fallback-branch offset");
  cmd_qiq->add_option("--fp-tol", qiq_solver.fixed_point_tol,
                      "fixed-point tolerance");
  cmd_qiq->add_option("--bisect-tol", qiq_solver.bisect_tol,
                      "quantile bisection tolerance");

  auto* cmd_q = app.add_subcommand("fit-q", "mean-optimal Q-learning");
  q_opts.add_common(cmd_q, false);

  auto* cmd_iq = app.add_subcommand("fit-iq", "mean-optimal IQ-learning");
  iq_opts.add_common(cmd_iq, true);

  auto* cmd_binq = app.add_subcommand("fit-binq", "Q-learning on 1{Y > lambda}");
  binq_opts.add_common(cmd_binq, false);
  cmd_binq->add_option("--lambda", binq_lambda, "outcome threshold")->required();

  // simulate ------------------------------------------------------------
  std::string sim_variant = "gaussian";
  std::vector<double> sim_C{0.0, 0.5, 1.0}, sim_lambdas, sim_taus;
  int sim_J = 100, sim_n = 250, sim_N = 10000, sim_mc = 10000;
  std::uint64_t sim_seed = 1;
  unsigned sim_threads = 0;
  std::vector<std::string> sim_estimators;
  std::string sim_cdf = "normal", sim_joint = "copula";
  std::string sim_out = "results.csv", sim_summary, sim_config_path;
  auto* cmd_sim = app.add_subcommand("simulate", "Monte Carlo experiment harness");
  cmd_sim->add_option("--variant", sim_variant, "gaussian|chisq");
  cmd_sim->add_option("--C", sim_C, "heteroskedasticity/skew levels");
  cmd_sim->add_option("--lambda", sim_lambdas, "thresholds (probability mode)");
  cmd_sim->add_option("--tau", sim_taus, "quantiles (quantile mode)");
  cmd_sim->add_option("--J", sim_J, "replications");
  cmd_sim->add_option("--n", sim_n, "training size");
  cmd_sim->add_option("--N", sim_N, "test size");
  cmd_sim->add_option("--seed", sim_seed, "master seed");
  cmd_sim->add_option("--estimators", sim_estimators,
                      "subset of tiq,qiq,q,iq,binq");
  cmd_sim->add_option("--cdf", sim_cdf, "normal|empirical");
  cmd_sim->add_option("--joint", sim_joint, "copula|kde");
  cmd_sim->add_option("--mc-draws", sim_mc, "Monte Carlo draws per decision");
  cmd_sim->add_option("--threads", sim_threads, "worker thread cap");
  cmd_sim->add_option("--out", sim_out, "tidy results CSV path");
  cmd_sim->add_option("--summary", sim_summary, "summary CSV path");
  cmd_sim->add_option("--config", sim_config_path, "JSON config file");

  // value ---------------------------------------------------------------
  std::string val_data, val_regime, val_out;
  double val_lambda = 0.0;
  auto* cmd_val = app.add_subcommand("value", "IPW value of a regime on data");
  cmd_val->add_option("--data", val_data)->required();
  cmd_val->add_option("--regime", val_regime,
                      "regime JSON or decisions CSV")->required();
  cmd_val->add_option("--lambda", val_lambda)->required();
  cmd_val->add_option("--out-json", val_out);

  // oracle ----------------------------------------------------------------
  std::string ora_variant = "gaussian", ora_grid, ora_regime, ora_out;
  double ora_C = 0.0;
  std::vector<double> ora_lambda, ora_tau;
  int ora_nbig = 100000, ora_population = 0;
  std::uint64_t ora_seed = 1;
  unsigned ora_threads = 0;
  auto* cmd_ora = app.add_subcommand(
      "oracle", "brute-force optima under a known generative model");
  cmd_ora->add_option("--variant", ora_variant, "gaussian|chisq");
  cmd_ora->add_option("--C", ora_C, "heteroskedasticity/skew level");
  cmd_ora->add_option("--lambda", ora_lambda, "threshold target");
  cmd_ora->add_option("--tau", ora_tau, "quantile target");
  cmd_ora->add_option("--h1-grid", ora_grid, "per-history action grid CSV");
  cmd_ora->add_option("--regime", ora_regime, "regime JSON to evaluate");
  cmd_ora->add_option("--population", ora_population,
                      "optimal-value mode: number of baseline draws");
  cmd_ora->add_option("--nbig", ora_nbig, "simulation draws per arm");
  cmd_ora->add_option("--seed", ora_seed);
  cmd_ora->add_option("--threads", ora_threads);
  cmd_ora->add_option("--out", ora_out, "output path (CSV for grids, JSON else)");

  // diagnose ---------------------------------------------------------------
  std::string diag_data, diag_prefix = "diagnose", diag_features = "default";
  auto* cmd_diag = app.add_subcommand(
      "diagnose", "stage-2 residual diagnostics (QQ, spread, fitted)");
  cmd_diag->add_option("--data", diag_data)->required();
  cmd_diag->add_option("--features", diag_features);
  cmd_diag->add_option("--out-prefix", diag_prefix);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    ordered_json err;
    err["error"] = {{"type", "usage"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  }

  try {
    if (cmd_tiq->parsed()) {
      tiq_opts.resolve(cmd_tiq, true);
      tiq_opts.config.apply("lambda", lambda, cmd_tiq->get_option_no_throw("--lambda"));
      ordered_json echo{{"data", tiq_opts.data_path}, {"lambda", lambda},
                        {"cdf", tiq_opts.cdf}, {"joint", tiq_opts.joint},
                        {"mc_draws", tiq_opts.mc_draws}, {"seed", tiq_opts.seed},
                        {"features", tiq_opts.features}};
      return run_fit_tiq(tiq_opts, lambda, compare_path, echo);
    }
    if (cmd_qiq->parsed()) {
      qiq_opts.resolve(cmd_qiq, true);
      qiq_opts.config.apply("tau", tau, cmd_qiq->get_option_no_throw("--tau"));
      qiq_opts.config.apply("delta", qiq_solver.delta, cmd_qiq->get_option_no_throw("--delta"));
      qiq_opts.config.apply("fp_tol", qiq_solver.fixed_point_tol,
                            cmd_qiq->get_option_no_throw("--fp-tol"));
      if (!(tau > 0.0 && tau < 1.0))
        throw DataError("--tau must lie strictly inside (0,1)");
      ordered_json echo{{"data", qiq_opts.data_path}, {"tau", tau},
                        {"cdf", qiq_opts.cdf}, {"joint", qiq_opts.joint},
                        {"mc_draws", qiq_opts.mc_draws}, {"seed", qiq_opts.seed},
                        {"delta", qiq_solver.delta},
                        {"fp_tol", qiq_solver.fixed_point_tol},
                        {"features", qiq_opts.features}};
      return run_fit_qiq(qiq_opts, tau, qiq_solver, echo);
    }
    if (cmd_q->parsed()) {
      q_opts.resolve(cmd_q, false);
      ordered_json echo{{"data", q_opts.data_path}, {"features", q_opts.features}};
      return run_fit_q(q_opts, echo);
    }
    if (cmd_iq->parsed()) {
      iq_opts.resolve(cmd_iq, true);
      ordered_json echo{{"data", iq_opts.data_path}, {"cdf", iq_opts.cdf},
                        {"joint", iq_opts.joint}, {"mc_draws", iq_opts.mc_draws},
                        {"seed", iq_opts.seed}, {"features", iq_opts.features}};
      return run_fit_iq(iq_opts, echo);
    }
    if (cmd_binq->parsed()) {
      binq_opts.resolve(cmd_binq, false);
      binq_opts.config.apply("lambda", binq_lambda,
                             cmd_binq->get_option_no_throw("--lambda"));
      ordered_json echo{{"data", binq_opts.data_path}, {"lambda", binq_lambda},
                        {"features", binq_opts.features}};
      return run_fit_binq(binq_opts, binq_lambda, echo);
    }
    if (cmd_sim->parsed()) {
      ConfigFile config;
      if (!sim_config_path.empty()) config.load(sim_config_path);
      config.apply("variant", sim_variant, cmd_sim->get_option_no_throw("--variant"));
      config.apply("C", sim_C, cmd_sim->get_option_no_throw("--C"));
      config.apply("lambda", sim_lambdas, cmd_sim->get_option_no_throw("--lambda"));
      config.apply("tau", sim_taus, cmd_sim->get_option_no_throw("--tau"));
      config.apply("J", sim_J, cmd_sim->get_option_no_throw("--J"));
      config.apply("n", sim_n, cmd_sim->get_option_no_throw("--n"));
      config.apply("N", sim_N, cmd_sim->get_option_no_throw("--N"));
      if (cmd_sim->get_option_no_throw("--seed")->count() == 0)
        sim_seed = env_seed(sim_seed);
      config.apply("seed", sim_seed, cmd_sim->get_option_no_throw("--seed"));
      config.apply("mc_draws", sim_mc, cmd_sim->get_option_no_throw("--mc-draws"));
      config.apply("estimators", sim_estimators,
                   cmd_sim->get_option_no_throw("--estimators"));
      config.apply("cdf", sim_cdf, cmd_sim->get_option_no_throw("--cdf"));
      config.apply("joint", sim_joint, cmd_sim->get_option_no_throw("--joint"));
      config.apply("out", sim_out, cmd_sim->get_option_no_throw("--out"));
      config.apply("summary", sim_summary, cmd_sim->get_option_no_throw("--summary"));
      if (cmd_sim->get_option_no_throw("--threads")->count() == 0) {
        const unsigned t = env_threads();
        if (t) sim_threads = t;
      }
      set_max_threads(sim_threads);

      ExperimentConfig cfg;
      cfg.variant = parse_variant(sim_variant);
      cfg.C_values = sim_C;
      cfg.lambdas = sim_lambdas;
      cfg.taus = sim_taus;
      cfg.J = sim_J;
      cfg.n = sim_n;
      cfg.N = sim_N;
      cfg.seed = sim_seed;
      cfg.cdf = parse_cdf(sim_cdf);
      cfg.joint = parse_joint(sim_joint);
      cfg.mc_draws = sim_mc;
      if (!sim_estimators.empty()) {
        cfg.estimators.clear();
        for (const auto& name : sim_estimators) {
          const auto kind = estimator_from_name(name);
          if (!kind) throw DataError("unknown estimator '" + name + "'");
          cfg.estimators.push_back(*kind);
        }
      } else if (!sim_taus.empty()) {
        cfg.estimators = {EstimatorKind::Qiq, EstimatorKind::QLearn,
                          EstimatorKind::IqLearn};
      }
      ordered_json echo{{"variant", sim_variant}, {"C", sim_C},
                        {"lambda", sim_lambdas}, {"tau", sim_taus},
                        {"J", sim_J}, {"n", sim_n}, {"N", sim_N},
                        {"seed", sim_seed}, {"cdf", sim_cdf},
                        {"joint", sim_joint}, {"mc_draws", sim_mc}};
      {
        std::vector<std::string> est_names;
        for (auto e : cfg.estimators) est_names.push_back(estimator_name(e));
        echo["estimators"] = est_names;
      }
      return run_simulate(cfg, sim_out, sim_summary, echo);
    }
    if (cmd_val->parsed()) {
      const ValueEstimate est = value_from_files(val_data, val_regime, val_lambda);
      ordered_json echo{{"data", val_data}, {"regime", val_regime},
                        {"lambda", val_lambda}};
      ordered_json out;
      out["meta"] = meta_json("value", echo);
      out["value"] = est.value;
      out["n_consistent"] = est.n_consistent;
      out["se"] = est.se;
      emit_json(out, val_out);
      return 0;
    }
    if (cmd_ora->parsed()) {
      set_max_threads(ora_threads ? ora_threads : env_threads());
      if (ora_lambda.empty() == ora_tau.empty())
        throw DataError("oracle: exactly one of --lambda / --tau is required");
      const GenerativeConfig gen =
          GenerativeConfig::defaults(parse_variant(ora_variant), ora_C);
      ordered_json echo{{"variant", ora_variant}, {"C", ora_C},
                        {"lambda", ora_lambda}, {"tau", ora_tau},
                        {"nbig", ora_nbig}, {"population", ora_population},
                        {"seed", ora_seed}};
      const ordered_json meta = meta_json("oracle", echo);
      if (!ora_grid.empty()) {
        const auto grid = read_h1_grid(ora_grid);
        const OracleTarget target =
            !ora_lambda.empty() ? OracleTarget::threshold(ora_lambda.front())
                                : OracleTarget::quantile(ora_tau.front());
        const auto actions =
            oracle_optimal_rule(gen, target, grid, ora_nbig, ora_seed);
        Table t;
        t.meta = meta_lines(meta);
        t.columns = {"row", "action", "p_minus", "p_plus", "gap_se", "near_tie"};
        for (size_t i = 0; i < actions.size(); ++i)
          t.rows.push_back({std::to_string(i), std::to_string(actions[i].action),
                            format_g9(actions[i].p_minus),
                            format_g9(actions[i].p_plus),
                            format_g9(actions[i].gap_se),
                            std::to_string(actions[i].near_tie ? 1 : 0)});
        if (ora_out.empty()) throw DataError("oracle --h1-grid requires --out");
        write_table(ora_out, t);
        return 0;
      }
      ordered_json out;
      out["meta"] = meta;
      if (ora_population > 0) {
        const OracleOptimum opt =
            !ora_lambda.empty()
                ? oracle_optimal_prob(gen, ora_lambda.front(), ora_population,
                                      ora_nbig, ora_seed)
                : oracle_optimal_quantile(gen, ora_tau.front(), ora_population,
                                          ora_nbig, ora_seed);
        out["optimal"] = opt.value;
        out["se"] = opt.se;
      } else if (!ora_regime.empty()) {
        const Regime regime = regime_from_json_file(ora_regime);
        const OracleResult res =
            !ora_lambda.empty()
                ? oracle_true_prob(gen, regime, ora_lambda.front(), ora_nbig,
                                   ora_seed)
                : oracle_true_quantile(gen, regime, ora_tau.front(), ora_nbig,
                                       ora_seed);
        out["value"] = res.value;
        out["se"] = res.se;
        out["n"] = res.n;
      } else {
        throw DataError("oracle: one of --h1-grid, --population, --regime required");
      }
      emit_json(out, ora_out);
      return 0;
    }
    if (cmd_diag->parsed()) {
      const Dataset data = read_dataset_csv(diag_data);
      Stage2Spec spec = Stage2Spec::defaults(data);
      if (diag_features == "stard") {
        spec.main.include_a1 = true;
        spec.interaction.include_a1 = true;
      }
      const FittedStage2 fit = fit_stage2(data, spec);
      const ResidualCdf cdf = ResidualCdf::normal_scale(fit.residuals);
      ordered_json echo{{"data", diag_data}, {"features", diag_features}};
      const ordered_json meta = meta_json("diagnose", echo);

      Table qq;
      qq.meta = meta_lines(meta);
      qq.columns = {"theoretical", "observed"};
      for (const auto& [th, ob] : cdf.qq_pairs())
        qq.rows.push_back({format_g9(th), format_g9(ob)});
      write_table(diag_prefix + "_qq.csv", qq);

      Table rf;
      rf.meta = meta_lines(meta);
      rf.columns = {"fitted", "residual"};
      for (int i = 0; i < data.n(); ++i) {
        const auto& r = data.row(i);
        const double fitted = m_hat(fit, r.x1, r.a1, r.x2) +
                              r.a2 * c_hat(fit, r.x1, r.a1, r.x2);
        rf.rows.push_back({format_g9(fitted), format_g9(fit.residuals(i))});
      }
      write_table(diag_prefix + "_resid_fitted.csv", rf);

      auto arm_sd = [&](auto pred) {
        double sum = 0.0, sq = 0.0;
        int count = 0;
        for (int i = 0; i < data.n(); ++i)
          if (pred(data.row(i))) {
            sum += fit.residuals(i);
            sq += fit.residuals(i) * fit.residuals(i);
            ++count;
          }
        const double mean = sum / std::max(count, 1);
        return std::pair<int, double>(
            count, count > 1 ? std::sqrt((sq - mean * sum) /
                                         static_cast<double>(count - 1))
                             : 0.0);
      };
      Table spread;
      spread.meta = meta_lines(meta);
      spread.columns = {"stage", "arm", "n", "sd"};
      for (int arm : {-1, 1}) {
        auto [c1, s1] = arm_sd([arm](const Trajectory& r) { return r.a1 == arm; });
        spread.rows.push_back({"1", std::to_string(arm), std::to_string(c1),
                               format_g9(s1)});
      }
      for (int arm : {-1, 1}) {
        auto [c2, s2] = arm_sd([arm](const Trajectory& r) { return r.a2 == arm; });
        spread.rows.push_back({"2", std::to_string(arm), std::to_string(c2),
                               format_g9(s2)});
      }
      write_table(diag_prefix + "_arm_spread.csv", spread);

      ordered_json out;
      out["meta"] = meta;
      out["residual_sd"] = fit.sigma_hat();
      out["files"] = {diag_prefix + "_qq.csv", diag_prefix + "_resid_fitted.csv",
                      diag_prefix + "_arm_spread.csv"};
      std::cout << out.dump(2) << "\n";
      return 0;
    }
  } catch (const DataError& e) {
    ordered_json err;
    err["error"] = {{"type", "data"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    ordered_json err;
    err["error"] = {{"type", "numerical"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 4;
  } catch (const std::exception& e) {
    ordered_json err;
    err["error"] = {{"type", "numerical"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 4;
  }
  return 2;
}

}  // namespace iqlearn
