#include "iqlearn/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "iqlearn/baselines.hpp"
#include "iqlearn/parallel.hpp"
#include "iqlearn/tiq.hpp"

namespace iqlearn {

GenerativeConfig GenerativeConfig::defaults(GenVariant variant, double C) {
  GenerativeConfig g;
  g.variant = variant;
  g.C = C;
  g.check();
  return g;
}

void GenerativeConfig::check() const {
  if (!(C >= 0.0 && C <= 1.0)) throw DataError("generative config: C must be in [0,1]");
  if (!(std::fabs(rho) < 1.0))
    throw DataError("generative config: |rho| < 1 required (positive definite)");
}

double GenerativeConfig::eta(const Eigen::VectorXd& x1, int a1) const {
  const Eigen::Vector3d h1(1.0, x1(0), x1(1));
  const double k = variant == GenVariant::Gaussian ? 0.5 * C : 0.5;
  return std::exp(k * (h1.dot(gamma0) + static_cast<double>(a1) * h1.dot(gamma1)));
}

double GenerativeConfig::draw_xi(Rng& rng) const {
  if (variant == GenVariant::Gaussian) return rng.normal();
  const double df = 10.0 * C + 1.0;
  return (rng.chi_squared(df) - df) / std::sqrt(2.0 * df);
}

double GenerativeConfig::true_m(const Eigen::Vector2d& x2) const {
  return beta20(0) + beta20(1) * x2(0) + beta20(2) * x2(1);
}

double GenerativeConfig::true_c(const Eigen::Vector2d& x2) const {
  return beta21(0) + beta21(1) * x2(0) + beta21(2) * x2(1);
}

Trajectory simulate_one(const GenerativeConfig& g, Rng& rng,
                        std::optional<int> force_a1,
                        std::optional<int> force_a2) {
  Trajectory t;
  // X1 ~ Norm(1_2, Sigma) via the Cholesky factor of the correlation matrix
  const double z1 = rng.normal();
  const double z2 = rng.normal();
  const double l21 = g.rho, l22 = std::sqrt(1.0 - g.rho * g.rho);
  t.x1 = Eigen::Vector2d(1.0 + z1, 1.0 + l21 * z1 + l22 * z2);

  const int a1_draw = rng.rademacher();
  t.a1 = force_a1.value_or(a1_draw);

  const double xi1 = g.draw_xi(rng);
  const double xi2 = g.draw_xi(rng);
  const Eigen::Matrix2d& B = t.a1 == 1 ? g.B_plus : g.B_minus;
  const double scale = g.eta(t.x1, t.a1);
  const Eigen::Vector2d x2 =
      B * Eigen::Vector2d(t.x1(0), t.x1(1)) + scale * Eigen::Vector2d(xi1, xi2);
  t.x2 = x2;

  const int a2_draw = rng.rademacher();
  t.a2 = force_a2.value_or(a2_draw);

  const double eps = rng.normal();
  t.y = g.true_m(x2) + static_cast<double>(t.a2) * g.true_c(x2) + eps;
  return t;
}

Dataset generate(const GenerativeConfig& config, int n, std::uint64_t seed) {
  if (n < 1) throw DataError("generate: n must be >= 1");
  config.check();
  std::vector<Trajectory> rows(static_cast<size_t>(n));
  parallel_for(static_cast<size_t>(n), [&](size_t i) {
    Rng rng(substream(seed, i));
    rows[i] = simulate_one(config, rng);
  });
  return Dataset::validate(std::move(rows));
}

namespace {

// Consistent-subgroup outcomes: Y values of test rows whose randomized
// treatments match the regime's recommendations.
std::vector<double> consistent_outcomes(const Dataset& test,
                                        const Regime& regime) {
  const int n = test.n();
  std::vector<unsigned char> keep(static_cast<size_t>(n), 0);
  parallel_for(static_cast<size_t>(n), [&](size_t i) {
    const auto& r = test.row(static_cast<int>(i));
    if (regime.pi1(r.x1) != r.a1) return;
    if (regime.pi2(r.x1, r.a1, r.x2) != r.a2) return;
    keep[i] = 1;
  });
  std::vector<double> ys;
  for (int i = 0; i < n; ++i)
    if (keep[static_cast<size_t>(i)]) ys.push_back(test.row(i).y);
  return ys;
}

}  // namespace

double evaluate_regime_prob(const GenerativeConfig& config, const Regime& regime,
                            double lambda, int N, std::uint64_t seed) {
  if (N < 1) throw DataError("evaluate_regime_prob: N must be >= 1");
  const Dataset test = generate(config, N, seed);
  const std::vector<double> ys = consistent_outcomes(test, regime);
  if (ys.empty()) throw NumericalError("empty consistent subgroup");
  std::size_t hits = 0;
  for (double y : ys) hits += y > lambda ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ys.size());
}

double evaluate_regime_quantile(const GenerativeConfig& config,
                                const Regime& regime, double tau, int N,
                                std::uint64_t seed) {
  if (N < 1) throw DataError("evaluate_regime_quantile: N must be >= 1");
  const Dataset test = generate(config, N, seed);
  std::vector<double> ys = consistent_outcomes(test, regime);
  if (ys.empty()) throw NumericalError("empty consistent subgroup");
  return empirical_quantile(std::move(ys), tau);
}

double empirical_quantile(std::vector<double> values, double tau) {
  if (values.empty()) throw NumericalError("empirical_quantile: empty sample");
  if (!(tau > 0.0 && tau < 1.0))
    throw DataError("empirical_quantile: tau must lie in (0,1)");
  std::sort(values.begin(), values.end());
  const auto m = static_cast<double>(values.size());
  auto k = static_cast<std::ptrdiff_t>(std::ceil(tau * m));
  k = std::clamp<std::ptrdiff_t>(k, 1, static_cast<std::ptrdiff_t>(values.size()));
  return values[static_cast<size_t>(k - 1)];
}

std::string estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::Tiq: return "tiq";
    case EstimatorKind::Qiq: return "qiq";
    case EstimatorKind::QLearn: return "q";
    case EstimatorKind::IqLearn: return "iq";
    case EstimatorKind::BinaryQ: return "binq";
  }
  return "?";
}

std::optional<EstimatorKind> estimator_from_name(const std::string& name) {
  if (name == "tiq") return EstimatorKind::Tiq;
  if (name == "qiq") return EstimatorKind::Qiq;
  if (name == "q") return EstimatorKind::QLearn;
  if (name == "iq") return EstimatorKind::IqLearn;
  if (name == "binq") return EstimatorKind::BinaryQ;
  return std::nullopt;
}

namespace {

struct RepOutput {
  std::vector<ExperimentRow> rows;
  std::vector<ExperimentFailure> failures;
};

bool uses(const std::vector<EstimatorKind>& list, EstimatorKind k) {
  return std::find(list.begin(), list.end(), k) != list.end();
}

void validate_experiment(const ExperimentConfig& cfg) {
  const bool prob = !cfg.lambdas.empty();
  const bool quant = !cfg.taus.empty();
  if (prob == quant)
    throw DataError("experiment: exactly one of lambda / tau levels required");
  if (cfg.J < 1 || cfg.n < 1 || cfg.N < 1 || cfg.mc_draws < 1)
    throw DataError("experiment: J, n, N and mc draws must be >= 1");
  if (cfg.C_values.empty() || cfg.estimators.empty())
    throw DataError("experiment: C list and estimator list must be non-empty");
  if (prob && uses(cfg.estimators, EstimatorKind::Qiq))
    throw DataError("experiment: qiq requires tau levels");
  if (quant && uses(cfg.estimators, EstimatorKind::Tiq))
    throw DataError("experiment: tiq requires lambda levels");
  if (quant && uses(cfg.estimators, EstimatorKind::BinaryQ))
    throw DataError("experiment: binq requires lambda levels");
}

RepOutput run_replication(const ExperimentConfig& cfg, double C, int rep,
                          std::uint64_t rep_seed) {
  RepOutput out;
  const bool prob_mode = !cfg.lambdas.empty();
  const std::vector<double>& levels = prob_mode ? cfg.lambdas : cfg.taus;
  const auto n_levels = levels.size();

  auto fail_all_levels = [&](EstimatorKind est, const std::string& what) {
    for (double lv : levels) out.failures.push_back({rep, C, est, lv, what});
  };

  GenerativeConfig gen = GenerativeConfig::defaults(cfg.variant, C);
  const Dataset train = generate(gen, cfg.n, substream(rep_seed, 0));
  const std::uint64_t test_seed = substream(rep_seed, 1);
  const std::uint64_t mc_seed = substream(rep_seed, 2);

  const bool want_tiq = uses(cfg.estimators, EstimatorKind::Tiq);
  const bool want_qiq = uses(cfg.estimators, EstimatorKind::Qiq);
  const bool want_q = uses(cfg.estimators, EstimatorKind::QLearn);
  const bool want_iq = uses(cfg.estimators, EstimatorKind::IqLearn);
  const bool want_binq = uses(cfg.estimators, EstimatorKind::BinaryQ);
  const bool need_parts = want_tiq || want_qiq || want_iq;

  // component and estimator fits; failures disable the estimator for this rep
  std::shared_ptr<const FittedStage2> stage2;
  std::shared_ptr<const Components> parts;
  try {
    if (need_parts) {
      FitConfig fc = FitConfig::defaults(train);
      fc.cdf = cfg.cdf;
      fc.joint = cfg.joint;
      fc.mc = McConfig{cfg.mc_draws, mc_seed};
      parts = fit_components(train, fc);
      stage2 = parts->stage2;
    } else {
      stage2 = std::make_shared<const FittedStage2>(
          fit_stage2(train, Stage2Spec::defaults(train)));
    }
  } catch (const std::exception& e) {
    for (EstimatorKind est : cfg.estimators) fail_all_levels(est, e.what());
    return out;
  }

  bool ok_tiq = want_tiq && parts != nullptr;
  bool ok_iq = want_iq && parts != nullptr;

  bool ok_q = false;
  QLearnFit qfit;
  if (want_q) {
    try {
      qfit = fit_qlearning(train, stage2, Stage1Spec::defaults(train));
      ok_q = true;
    } catch (const std::exception& e) {
      fail_all_levels(EstimatorKind::QLearn, e.what());
    }
  }

  std::vector<bool> ok_binq(n_levels, false);
  std::vector<BinaryQFit> binq_fits(n_levels);
  if (want_binq) {
    for (size_t l = 0; l < n_levels; ++l) {
      try {
        binq_fits[l] = fit_binary_q(train, levels[l], Stage2Spec::defaults(train),
                                    Stage1Spec::defaults(train));
        ok_binq[l] = true;
      } catch (const std::exception& e) {
        out.failures.push_back({rep, C, EstimatorKind::BinaryQ, levels[l], e.what()});
      }
    }
  }

  std::vector<bool> ok_qiq(n_levels, false);
  std::vector<double> qiq_thresholds(n_levels, 0.0);
  if (want_qiq) {
    for (size_t l = 0; l < n_levels; ++l) {
      try {
        QiqModel model(parts, levels[l], cfg.qiq);
        model.solve();
        qiq_thresholds[l] = model.rule_threshold();
        ok_qiq[l] = true;
      } catch (const std::exception& e) {
        out.failures.push_back({rep, C, EstimatorKind::Qiq, levels[l], e.what()});
      }
    }
  }

  const Dataset test = generate(gen, cfg.N, test_seed);
  const int N = test.n();

  // per-row first-stage decisions (one freeze of the Monte Carlo draws per
  // row, shared across thresholds and estimators) and second-stage
  // recommendations
  std::vector<int> pi2_shared(static_cast<size_t>(N));
  std::vector<int> q_act(want_q ? N : 0), iq_act(ok_iq ? N : 0);
  std::vector<std::vector<int>> tiq_act(n_levels), qiq_act(n_levels),
      binq_act(n_levels), binq_pi2(n_levels);
  for (size_t l = 0; l < n_levels; ++l) {
    if (ok_tiq) tiq_act[l].resize(static_cast<size_t>(N));
    if (want_qiq && ok_qiq[l]) qiq_act[l].resize(static_cast<size_t>(N));
    if (want_binq && ok_binq[l]) {
      binq_act[l].resize(static_cast<size_t>(N));
      binq_pi2[l].resize(static_cast<size_t>(N));
    }
  }

  parallel_for(static_cast<size_t>(N), [&](size_t i) {
    const auto& r = test.row(static_cast<int>(i));
    pi2_shared[i] = sgn(c_hat(*stage2, r.x1, r.a1, r.x2));
    if (ok_tiq || ok_iq || want_qiq) {
      const auto w = parts->joint.sample_w_arms(r.x1, parts->mc.draws,
                                                mc_stream(parts->mc.seed, r.x1));
      if (ok_tiq)
        for (size_t l = 0; l < n_levels; ++l)
          tiq_act[l][i] = tiq_decide_from_w(w, parts->cdf, levels[l]).action;
      if (want_qiq)
        for (size_t l = 0; l < n_levels; ++l)
          if (ok_qiq[l])
            qiq_act[l][i] =
                tiq_decide_from_w(w, parts->cdf, qiq_thresholds[l]).action;
      if (ok_iq) {
        double sm = 0.0, sp = 0.0;
        for (size_t k = 0; k < w.minus.size(); ++k) {
          sm += w.minus[k];
          sp += w.plus[k];
        }
        iq_act[i] = sgn(sp - sm);
      }
    }
    if (ok_q) q_act[i] = qfit.regime.pi1(r.x1);
    for (size_t l = 0; l < n_levels; ++l)
      if (want_binq && ok_binq[l]) {
        binq_act[l][i] = binq_fits[l].regime.pi1(r.x1);
        binq_pi2[l][i] = binq_fits[l].regime.pi2(r.x1, r.a1, r.x2);
      }
  });

  auto metric = [&](const std::vector<int>& act1, const std::vector<int>& act2,
                    double level, EstimatorKind est) {
    std::vector<double> ys;
    for (int i = 0; i < N; ++i) {
      const auto& r = test.row(i);
      if (r.a1 != act1[static_cast<size_t>(i)]) continue;
      if (r.a2 != act2[static_cast<size_t>(i)]) continue;
      ys.push_back(r.y);
    }
    if (ys.empty()) {
      out.failures.push_back({rep, C, est, level, "empty consistent subgroup"});
      return;
    }
    double value;
    if (prob_mode) {
      std::size_t hits = 0;
      for (double y : ys) hits += y > level ? 1 : 0;
      value = static_cast<double>(hits) / static_cast<double>(ys.size());
    } else {
      value = empirical_quantile(ys, level);
    }
    out.rows.push_back(
        {rep, C, est, level, value, static_cast<int>(ys.size())});
  };

  for (size_t l = 0; l < n_levels; ++l) {
    const double lv = levels[l];
    if (ok_tiq) metric(tiq_act[l], pi2_shared, lv, EstimatorKind::Tiq);
    if (want_qiq && ok_qiq[l]) metric(qiq_act[l], pi2_shared, lv, EstimatorKind::Qiq);
    if (ok_q) metric(q_act, pi2_shared, lv, EstimatorKind::QLearn);
    if (ok_iq) metric(iq_act, pi2_shared, lv, EstimatorKind::IqLearn);
    if (want_binq && ok_binq[l]) metric(binq_act[l], binq_pi2[l], lv, EstimatorKind::BinaryQ);
  }
  return out;
}

}  // namespace

std::vector<ExperimentSummaryRow> ExperimentResult::summary() const {
  std::map<std::tuple<double, int, double>, std::vector<double>> groups;
  for (const auto& r : rows)
    groups[{r.C, static_cast<int>(r.estimator), r.level}].push_back(r.value);
  std::vector<ExperimentSummaryRow> out;
  for (const auto& [key, values] : groups) {
    ExperimentSummaryRow s;
    s.C = std::get<0>(key);
    s.estimator = static_cast<EstimatorKind>(std::get<1>(key));
    s.level = std::get<2>(key);
    s.reps = static_cast<int>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var = values.size() > 1 ? var / static_cast<double>(values.size() - 1) : 0.0;
    s.mean = mean;
    s.se = std::sqrt(var / static_cast<double>(values.size()));
    out.push_back(s);
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate_experiment(cfg);
  const size_t n_c = cfg.C_values.size();
  const size_t total = n_c * static_cast<size_t>(cfg.J);
  std::vector<RepOutput> outputs(total);
  parallel_for(total, [&](size_t t) {
    const size_t ci = t / static_cast<size_t>(cfg.J);
    const int rep = static_cast<int>(t % static_cast<size_t>(cfg.J));
    const std::uint64_t rep_seed =
        substream(substream(cfg.seed, ci), static_cast<std::uint64_t>(rep));
    outputs[t] = run_replication(cfg, cfg.C_values[ci], rep, rep_seed);
  });
  ExperimentResult result;
  for (auto& o : outputs) {
    result.rows.insert(result.rows.end(), o.rows.begin(), o.rows.end());
    result.failures.insert(result.failures.end(), o.failures.begin(),
                           o.failures.end());
  }
  return result;
}

}  // namespace iqlearn
