#include "iqlearn/stage2.hpp"

#include <cmath>

#include "iqlearn/linreg.hpp"

namespace iqlearn {

double FittedStage2::sigma_hat() const {
  const double n = static_cast<double>(residuals.size());
  return std::sqrt(residuals.squaredNorm() / n);
}

// A constant treatment column surfaces as rank deficiency (every feature
// map carries an intercept), so no separate arm-presence check is needed.
FittedStage2 fit_stage2(const Dataset& data, const Stage2Spec& spec) {
  const int n = data.n();
  const int k0 = spec.main.dim();
  const int k1 = spec.interaction.dim();
  Eigen::MatrixXd design(n, k0 + k1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const auto& r = data.row(i);
    design.row(i).head(k0) = spec.main.build(r.x1, r.a1, r.x2);
    design.row(i).tail(k1) =
        static_cast<double>(r.a2) * spec.interaction.build(r.x1, r.a1, r.x2);
    y(i) = r.y;
  }
  std::vector<std::string> names;
  for (const auto& s : spec.main.names()) names.push_back("m:" + s);
  for (const auto& s : spec.interaction.names()) names.push_back("c:" + s);
  const Eigen::VectorXd beta = solve_least_squares(design, y, names);

  FittedStage2 fit;
  fit.spec = spec;
  fit.beta20 = beta.head(k0);
  fit.beta21 = beta.tail(k1);
  fit.residuals = y - design * beta;
  fit.data_hash = data.hash();
  return fit;
}

namespace {
double dot_checked(const Eigen::VectorXd& coef, const Eigen::VectorXd& h,
                   const char* what) {
  if (coef.size() != h.size())
    throw DataError(std::string(what) + ": history dimension mismatch");
  return coef.dot(h);
}
}  // namespace

double m_hat(const FittedStage2& fit, const History2& h2_main) {
  return dot_checked(fit.beta20, h2_main, "m_hat");
}

double c_hat(const FittedStage2& fit, const History2& h2_interaction) {
  return dot_checked(fit.beta21, h2_interaction, "c_hat");
}

double m_hat(const FittedStage2& fit, const Eigen::VectorXd& x1, int a1,
             const Eigen::VectorXd& x2) {
  return m_hat(fit, fit.spec.main.build(x1, a1, x2));
}

double c_hat(const FittedStage2& fit, const Eigen::VectorXd& x1, int a1,
             const Eigen::VectorXd& x2) {
  return c_hat(fit, fit.spec.interaction.build(x1, a1, x2));
}

Regime::Rule2 pi2_star(std::shared_ptr<const FittedStage2> fit) {
  return [fit](const Eigen::VectorXd& x1, int a1, const Eigen::VectorXd& x2) {
    return sgn(c_hat(*fit, x1, a1, x2));
  };
}

}  // namespace iqlearn
