#pragma once

#include <functional>

#include "iqlearn/components.hpp"

namespace iqlearn {

struct QiqOptions {
  double fixed_point_tol = 1e-3;  // |f(y*) - y*| for the direct branch
  double delta = 1e-2;            // fallback offset when the check fails
  double bisect_tol = 1e-4;       // bracket width at termination
  int max_doublings = 60;         // bracket expansion budget
};

// Quantile interactive Q-learning. On construction the model freezes one
// set of residual draws per training history (reused for every quantile
// argument and both arms), which makes the pooled CDF exactly monotone in
// y so bisection for the infimum is valid.
class QiqModel {
 public:
  QiqModel(std::shared_ptr<const Components> parts, double tau,
           QiqOptions opts = {});

  // Average over training histories of I[y | arm chosen by `rule`].
  double pooled_cdf_at(double y,
                       const std::function<int(const Eigen::VectorXd&)>& rule) const;
  // Composite map y -> n^-1 sum_i I[y | arm Gamma(h1i, y)]; the rule is
  // recomputed at each y, equivalently the per-patient minimum arm.
  double pooled_cdf_at(double y) const;

  // Gamma(h1i, y) for every training history (the TIQ rule at threshold y).
  std::vector<int> gamma_arms(double y) const;

  // inf{y : pooled composite CDF >= tau} by bracketing plus bisection.
  double y_star(double tau) const;
  // inf{y : pooled CDF with the rule frozen at Gamma(., y_rule) >= tau}.
  double f_hat(double y_rule) const;

  // Runs the full algorithm: y*, f(y*), branch selection.
  void solve();

  double tau() const { return tau_; }
  double y_star_hat() const { return y_star_; }
  double f_at_y_star() const { return f_at_y_star_; }
  bool fallback_branch() const { return fallback_; }
  // Threshold the returned first-stage rule is evaluated at
  // (y* on the direct branch, y* - delta on the fallback branch).
  double rule_threshold() const { return rule_threshold_; }
  const QiqOptions& options() const { return opts_; }
  const std::shared_ptr<const Components>& parts() const { return parts_; }

 private:
  double pooled_fixed_arms(double y, const std::vector<int>& arms) const;
  double infimum(double tau, const std::function<double(double)>& pooled) const;

  std::shared_ptr<const Components> parts_;
  double tau_;
  QiqOptions opts_;
  std::vector<ConditionalJoint::ArmW> frozen_;
  double w_min_ = 0.0, w_max_ = 0.0;
  double y_star_ = 0.0, f_at_y_star_ = 0.0, rule_threshold_ = 0.0;
  bool fallback_ = false;
  bool solved_ = false;
};

struct QiqFit {
  QiqModel model;
  Regime regime;
};

QiqFit fit_qiq(const Dataset& data, double tau, const FitConfig& config,
               const QiqOptions& opts = {});
QiqFit fit_qiq(std::shared_ptr<const Components> parts, double tau,
               const QiqOptions& opts = {});

}  // namespace iqlearn
