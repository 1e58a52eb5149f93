#pragma once

#include <span>

#include "iqlearn/components.hpp"

namespace iqlearn {

// Threshold interactive Q-learning: the fitted regime maximizes the
// plug-in estimate of pr(Y > lambda).
struct TiqModel {
  std::shared_ptr<const Components> parts;
  double lambda = 0.0;
};

struct TiqDecision {
  int action = 1;      // sgn(d_hat)
  double d_hat = 0.0;  // I(lambda | a1=-1) - I(lambda | a1=+1)
  double mc_se = 0.0;  // Monte Carlo SE of d_hat (paired draws)
};

// First-stage decision at one or several thresholds; the same residual
// draws back every threshold and both arms (common random numbers).
TiqDecision tiq_decide(const Components& parts, const Eigen::VectorXd& x1,
                       double lambda);
std::vector<TiqDecision> tiq_decide_multi(const Components& parts,
                                          const Eigen::VectorXd& x1,
                                          std::span<const double> lambdas);
// Decision from already-frozen w draws (lets callers reuse one freeze
// across thresholds and estimators).
TiqDecision tiq_decide_from_w(const ConditionalJoint::ArmW& w,
                              const ResidualCdf& F, double lambda);

double d_hat(const TiqModel& model, const Eigen::VectorXd& x1, double lambda);
int tiq_pi1(const TiqModel& model, const Eigen::VectorXd& x1);

struct TiqFit {
  TiqModel model;
  Regime regime;
};

TiqFit fit_tiq(const Dataset& data, double lambda, const FitConfig& config);
TiqFit fit_tiq(std::shared_ptr<const Components> parts, double lambda);

// Per-history comparison of the mean-optimal and threshold-optimal
// first-stage decisions (both computed from the same draws).
struct MeanVsTiqRow {
  int mean_action = 1;
  int tiq_action = 1;
  bool disagree = false;
};
std::vector<MeanVsTiqRow> compare_mean_vs_tiq(
    const Components& parts, std::span<const Eigen::VectorXd> histories,
    double lambda);

}  // namespace iqlearn
