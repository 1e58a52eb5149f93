#include "iqlearn/tiq.hpp"

#include <cmath>

#include "iqlearn/parallel.hpp"

namespace iqlearn {

namespace {

TiqDecision decide_from_w(const ConditionalJoint::ArmW& w,
                          const ResidualCdf& F, double lambda) {
  const auto m = static_cast<double>(w.minus.size());
  double sum = 0.0, sum2 = 0.0;
  for (size_t k = 0; k < w.minus.size(); ++k) {
    const double diff = F(lambda - w.minus[k]) - F(lambda - w.plus[k]);
    sum += diff;
    sum2 += diff * diff;
  }
  TiqDecision d;
  d.d_hat = sum / m;
  const double var = std::max(0.0, sum2 / m - d.d_hat * d.d_hat);
  d.mc_se = std::sqrt(var / m);
  d.action = sgn(d.d_hat);
  return d;
}

}  // namespace

TiqDecision tiq_decide_from_w(const ConditionalJoint::ArmW& w,
                              const ResidualCdf& F, double lambda) {
  return decide_from_w(w, F, lambda);
}

TiqDecision tiq_decide(const Components& parts, const Eigen::VectorXd& x1,
                       double lambda) {
  const auto w = parts.joint.sample_w_arms(x1, parts.mc.draws,
                                           mc_stream(parts.mc.seed, x1));
  return decide_from_w(w, parts.cdf, lambda);
}

std::vector<TiqDecision> tiq_decide_multi(const Components& parts,
                                          const Eigen::VectorXd& x1,
                                          std::span<const double> lambdas) {
  const auto w = parts.joint.sample_w_arms(x1, parts.mc.draws,
                                           mc_stream(parts.mc.seed, x1));
  std::vector<TiqDecision> out;
  out.reserve(lambdas.size());
  for (double lam : lambdas) out.push_back(decide_from_w(w, parts.cdf, lam));
  return out;
}

double d_hat(const TiqModel& model, const Eigen::VectorXd& x1, double lambda) {
  return tiq_decide(*model.parts, x1, lambda).d_hat;
}

int tiq_pi1(const TiqModel& model, const Eigen::VectorXd& x1) {
  return tiq_decide(*model.parts, x1, model.lambda).action;
}

TiqFit fit_tiq(std::shared_ptr<const Components> parts, double lambda) {
  if (!std::isfinite(lambda)) throw DataError("fit_tiq: lambda must be finite");
  parts->check_provenance();
  TiqFit fit;
  fit.model = TiqModel{parts, lambda};
  auto stage2 = parts->stage2;
  fit.regime = Regime(
      [parts, lambda](const Eigen::VectorXd& x1) {
        return tiq_decide(*parts, x1, lambda).action;
      },
      pi2_star(stage2));
  return fit;
}

TiqFit fit_tiq(const Dataset& data, double lambda, const FitConfig& config) {
  return fit_tiq(fit_components(data, config), lambda);
}

std::vector<MeanVsTiqRow> compare_mean_vs_tiq(
    const Components& parts, std::span<const Eigen::VectorXd> histories,
    double lambda) {
  std::vector<MeanVsTiqRow> rows(histories.size());
  parallel_for(histories.size(), [&](size_t i) {
    const auto& x1 = histories[i];
    const auto w = parts.joint.sample_w_arms(x1, parts.mc.draws,
                                             mc_stream(parts.mc.seed, x1));
    // mean-optimal rule: argmin over a1 of the average of (-u - |v|),
    // i.e. the sign of mean(w_plus) - mean(w_minus)
    double mean_minus = 0.0, mean_plus = 0.0;
    for (size_t k = 0; k < w.minus.size(); ++k) {
      mean_minus += w.minus[k];
      mean_plus += w.plus[k];
    }
    MeanVsTiqRow row;
    row.mean_action = sgn(mean_plus - mean_minus);
    row.tiq_action = decide_from_w(w, parts.cdf, lambda).action;
    row.disagree = row.mean_action != row.tiq_action;
    rows[i] = row;
  });
  return rows;
}

}  // namespace iqlearn
