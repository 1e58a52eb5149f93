#include "iqlearn/baselines.hpp"

#include <cmath>

#include "iqlearn/linreg.hpp"

namespace iqlearn {

namespace {

struct Stage1Design {
  Eigen::MatrixXd X;
  std::vector<std::string> names;
  int k0 = 0, k1 = 0;
};

Stage1Design stage1_design(const Dataset& data, const Stage1Spec& spec) {
  Stage1Design d;
  d.k0 = spec.main.dim();
  d.k1 = spec.interaction.dim();
  d.X.resize(data.n(), d.k0 + d.k1);
  for (int i = 0; i < data.n(); ++i) {
    const auto& r = data.row(i);
    d.X.row(i).head(d.k0) = spec.main.build(r.x1);
    d.X.row(i).tail(d.k1) =
        static_cast<double>(r.a1) * spec.interaction.build(r.x1);
  }
  for (const auto& s : spec.main.names()) d.names.push_back("q1:" + s);
  for (const auto& s : spec.interaction.names()) d.names.push_back("q1:a1*" + s);
  return d;
}

}  // namespace

QLearnFit fit_qlearning(const Dataset& data,
                        std::shared_ptr<const FittedStage2> stage2,
                        const Stage1Spec& s1) {
  if (stage2->data_hash != data.hash())
    throw DataError("fit_qlearning: stage-2 fit is from a different dataset");
  Eigen::VectorXd y_tilde(data.n());
  for (int i = 0; i < data.n(); ++i) {
    const auto& r = data.row(i);
    y_tilde(i) = m_hat(*stage2, r.x1, r.a1, r.x2) +
                 std::fabs(c_hat(*stage2, r.x1, r.a1, r.x2));
  }
  const Stage1Design d = stage1_design(data, s1);
  const Eigen::VectorXd beta = solve_least_squares(d.X, y_tilde, d.names);

  QLearnFit fit;
  fit.stage2 = stage2;
  fit.stage1 = s1;
  fit.beta10 = beta.head(d.k0);
  fit.beta11 = beta.tail(d.k1);
  const Stage1Spec spec = s1;
  const Eigen::VectorXd b11 = fit.beta11;
  fit.regime = Regime(
      [spec, b11](const Eigen::VectorXd& x1) {
        return sgn(spec.interaction.build(x1).dot(b11));
      },
      pi2_star(stage2));
  return fit;
}

QLearnFit fit_qlearning(const Dataset& data, const Stage2Spec& s2,
                        const Stage1Spec& s1) {
  auto stage2 = std::make_shared<const FittedStage2>(fit_stage2(data, s2));
  return fit_qlearning(data, stage2, s1);
}

IqDecision iq_decide(const Components& parts, const Eigen::VectorXd& x1) {
  const auto w = parts.joint.sample_w_arms(x1, parts.mc.draws,
                                           mc_stream(parts.mc.seed, x1));
  double mean_minus = 0.0, mean_plus = 0.0;
  for (size_t k = 0; k < w.minus.size(); ++k) {
    mean_minus += w.minus[k];
    mean_plus += w.plus[k];
  }
  const auto m = static_cast<double>(w.minus.size());
  IqDecision dec;
  dec.d_mean = (mean_plus - mean_minus) / m;
  dec.action = sgn(dec.d_mean);
  return dec;
}

Regime fit_iqlearning(std::shared_ptr<const Components> parts) {
  parts->check_provenance();
  auto stage2 = parts->stage2;
  return Regime(
      [parts](const Eigen::VectorXd& x1) {
        return iq_decide(*parts, x1).action;
      },
      pi2_star(stage2));
}

Regime fit_iqlearning(const Dataset& data, const FitConfig& config) {
  return fit_iqlearning(fit_components(data, config));
}

BinaryQFit fit_binary_q(const Dataset& data, double lambda,
                        const Stage2Spec& s2, const Stage1Spec& s1) {
  data.require_both_arms();
  const int n = data.n();
  const int k0 = s2.main.dim();
  const int k1 = s2.interaction.dim();
  Eigen::MatrixXd design(n, k0 + k1);
  Eigen::VectorXd indicator(n);
  for (int i = 0; i < n; ++i) {
    const auto& r = data.row(i);
    design.row(i).head(k0) = s2.main.build(r.x1, r.a1, r.x2);
    design.row(i).tail(k1) =
        static_cast<double>(r.a2) * s2.interaction.build(r.x1, r.a1, r.x2);
    indicator(i) = r.y > lambda ? 1.0 : 0.0;
  }
  std::vector<std::string> names;
  for (const auto& s : s2.main.names()) names.push_back("bq:m:" + s);
  for (const auto& s : s2.interaction.names()) names.push_back("bq:c:" + s);

  BinaryQFit fit;
  fit.stage2_spec = s2;
  fit.stage1_spec = s1;
  const Eigen::VectorXd beta =
      fit_logistic(design, indicator, names, 50, 1e-8, &fit.newton_iters);
  fit.beta20 = beta.head(k0);
  fit.beta21 = beta.tail(k1);

  // pseudo-outcome on the linear-predictor scale
  Eigen::VectorXd y_tilde(n);
  for (int i = 0; i < n; ++i) {
    const auto& r = data.row(i);
    const double m_star = s2.main.build(r.x1, r.a1, r.x2).dot(fit.beta20);
    const double c_star =
        s2.interaction.build(r.x1, r.a1, r.x2).dot(fit.beta21);
    y_tilde(i) = m_star + std::fabs(c_star);
  }
  const Stage1Design d = stage1_design(data, s1);
  const Eigen::VectorXd beta1 = solve_least_squares(d.X, y_tilde, d.names);
  fit.beta10 = beta1.head(d.k0);
  fit.beta11 = beta1.tail(d.k1);

  const Stage2Spec spec2 = s2;
  const Stage1Spec spec1 = s1;
  const Eigen::VectorXd b21 = fit.beta21;
  const Eigen::VectorXd b11 = fit.beta11;
  fit.regime = Regime(
      [spec1, b11](const Eigen::VectorXd& x1) {
        return sgn(spec1.interaction.build(x1).dot(b11));
      },
      [spec2, b21](const Eigen::VectorXd& x1, int a1, const Eigen::VectorXd& x2) {
        return sgn(spec2.interaction.build(x1, a1, x2).dot(b21));
      });
  return fit;
}

}  // namespace iqlearn
