#include "iqlearn/qiq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "iqlearn/parallel.hpp"
#include "iqlearn/tiq.hpp"

namespace iqlearn {

QiqModel::QiqModel(std::shared_ptr<const Components> parts, double tau,
                   QiqOptions opts)
    : parts_(std::move(parts)), tau_(tau), opts_(opts) {
  if (!(tau > 0.0 && tau < 1.0))
    throw DataError("qiq: tau must lie strictly inside (0, 1)");
  parts_->check_provenance();
  const auto& x1s = parts_->train_x1;
  frozen_.resize(x1s.size());
  parallel_for(x1s.size(), [&](size_t i) {
    frozen_[i] = parts_->joint.sample_w_arms(
        x1s[i], parts_->mc.draws, mc_stream(parts_->mc.seed, x1s[i]));
  });
  w_min_ = std::numeric_limits<double>::infinity();
  w_max_ = -w_min_;
  for (const auto& w : frozen_) {
    for (double v : w.minus) {
      w_min_ = std::min(w_min_, v);
      w_max_ = std::max(w_max_, v);
    }
    for (double v : w.plus) {
      w_min_ = std::min(w_min_, v);
      w_max_ = std::max(w_max_, v);
    }
  }
}

double QiqModel::pooled_cdf_at(
    double y, const std::function<int(const Eigen::VectorXd&)>& rule) const {
  double acc = 0.0;
  for (size_t i = 0; i < frozen_.size(); ++i) {
    const int arm = rule(parts_->train_x1[i]);
    const auto& w = arm == 1 ? frozen_[i].plus : frozen_[i].minus;
    acc += detail::i_from_w(w, parts_->cdf, y);
  }
  return acc / static_cast<double>(frozen_.size());
}

double QiqModel::pooled_cdf_at(double y) const {
  double acc = 0.0;
  for (const auto& w : frozen_) {
    const double i_minus = detail::i_from_w(w.minus, parts_->cdf, y);
    const double i_plus = detail::i_from_w(w.plus, parts_->cdf, y);
    acc += std::min(i_minus, i_plus);  // arm sgn(i_minus - i_plus) attains it
  }
  return acc / static_cast<double>(frozen_.size());
}

std::vector<int> QiqModel::gamma_arms(double y) const {
  std::vector<int> arms(frozen_.size());
  for (size_t i = 0; i < frozen_.size(); ++i) {
    const double i_minus = detail::i_from_w(frozen_[i].minus, parts_->cdf, y);
    const double i_plus = detail::i_from_w(frozen_[i].plus, parts_->cdf, y);
    arms[i] = sgn(i_minus - i_plus);
  }
  return arms;
}

double QiqModel::pooled_fixed_arms(double y, const std::vector<int>& arms) const {
  double acc = 0.0;
  for (size_t i = 0; i < frozen_.size(); ++i) {
    const auto& w = arms[i] == 1 ? frozen_[i].plus : frozen_[i].minus;
    acc += detail::i_from_w(w, parts_->cdf, y);
  }
  return acc / static_cast<double>(frozen_.size());
}

double QiqModel::infimum(double tau,
                         const std::function<double(double)>& pooled) const {
  const double sigma = parts_->stage2->sigma_hat();
  double lo = w_min_ - 5.0 * sigma;
  double hi = w_max_ + 5.0 * sigma;
  double width = hi - lo;
  if (width <= 0.0) width = 1.0;
  int doublings = 0;
  while (pooled(hi) < tau) {
    hi += width;
    width *= 2.0;
    if (++doublings > opts_.max_doublings)
      throw NumericalError("qiq: bracket expansion failed above");
  }
  width = hi - lo;
  while (pooled(lo) >= tau) {
    lo -= width;
    width *= 2.0;
    if (++doublings > opts_.max_doublings)
      throw NumericalError("qiq: bracket expansion failed below");
  }
  // invariant: pooled(lo) < tau <= pooled(hi)
  while (hi - lo > opts_.bisect_tol) {
    const double mid = 0.5 * (lo + hi);
    if (pooled(mid) >= tau)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

double QiqModel::y_star(double tau) const {
  if (!(tau > 0.0 && tau < 1.0)) throw DataError("qiq: tau out of (0,1)");
  return infimum(tau, [this](double y) { return pooled_cdf_at(y); });
}

double QiqModel::f_hat(double y_rule) const {
  const std::vector<int> arms = gamma_arms(y_rule);
  return infimum(tau_,
                 [this, &arms](double y) { return pooled_fixed_arms(y, arms); });
}

void QiqModel::solve() {
  y_star_ = y_star(tau_);
  f_at_y_star_ = f_hat(y_star_);
  fallback_ = std::fabs(f_at_y_star_ - y_star_) > opts_.fixed_point_tol;
  rule_threshold_ = fallback_ ? y_star_ - opts_.delta : y_star_;
  solved_ = true;
}

QiqFit fit_qiq(std::shared_ptr<const Components> parts, double tau,
               const QiqOptions& opts) {
  QiqModel model(parts, tau, opts);
  model.solve();
  const double threshold = model.rule_threshold();
  auto stage2 = parts->stage2;
  Regime regime(
      [parts, threshold](const Eigen::VectorXd& x1) {
        return tiq_decide(*parts, x1, threshold).action;
      },
      pi2_star(stage2));
  return QiqFit{std::move(model), std::move(regime)};
}

QiqFit fit_qiq(const Dataset& data, double tau, const FitConfig& config,
               const QiqOptions& opts) {
  return fit_qiq(fit_components(data, config), tau, opts);
}

}  // namespace iqlearn
