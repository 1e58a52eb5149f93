#pragma once

#include "iqlearn/components.hpp"

namespace iqlearn {

// Mean-optimal Q-learning: stage-2 least squares shared with the other
// estimators, pseudo-outcome Ytilde = m_hat + |c_hat|, stage-1 least
// squares of Ytilde on (h10, a1*h11), first-stage rule = sign of the
// a1 contrast. The threshold never enters.
struct QLearnFit {
  std::shared_ptr<const FittedStage2> stage2;
  Stage1Spec stage1;
  Eigen::VectorXd beta10;  // stage-1 main coefficients
  Eigen::VectorXd beta11;  // stage-1 interaction coefficients
  Regime regime;
};

QLearnFit fit_qlearning(const Dataset& data, const Stage2Spec& s2,
                        const Stage1Spec& s1);
QLearnFit fit_qlearning(const Dataset& data,
                        std::shared_ptr<const FittedStage2> stage2,
                        const Stage1Spec& s1);

// Mean-optimal rule computed from the fitted conditional joint: the arm
// minimizing the sampled average of (-u - |v|), common random numbers
// across arms, ties to +1.
struct IqDecision {
  int action = 1;
  double d_mean = 0.0;  // mean(w_plus) - mean(w_minus), w = u + |v|
};
IqDecision iq_decide(const Components& parts, const Eigen::VectorXd& x1);
Regime fit_iqlearning(std::shared_ptr<const Components> parts);
Regime fit_iqlearning(const Dataset& data, const FitConfig& config);

// Q-learning on the indicator outcome 1{Y > lambda}: logistic stage-2
// model with linear predictor m*(h2) + a2 c*(h2), pseudo-outcome
// m* + |c*| on the linear-predictor scale, stage-1 least squares.
struct BinaryQFit {
  Stage2Spec stage2_spec;
  Stage1Spec stage1_spec;
  Eigen::VectorXd beta20;  // logistic main coefficients
  Eigen::VectorXd beta21;  // logistic interaction coefficients
  Eigen::VectorXd beta10;
  Eigen::VectorXd beta11;
  int newton_iters = 0;
  Regime regime;
};

BinaryQFit fit_binary_q(const Dataset& data, double lambda,
                        const Stage2Spec& s2, const Stage1Spec& s1);

}  // namespace iqlearn
