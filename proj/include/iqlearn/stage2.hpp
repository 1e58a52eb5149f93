#pragma once

#include <cstdint>
#include <memory>

#include "iqlearn/core.hpp"

namespace iqlearn {

// Feature maps for the second-stage model
//   Y = h20' beta20 + a2 * (h21' beta21) + eps.
// The main-effect and interaction maps may differ; by default both are
// (1, x2')'.
struct Stage2Spec {
  FeatureMap main;
  FeatureMap interaction;

  static Stage2Spec defaults(const Dataset& data) {
    return {FeatureMap::history2(data.p2()), FeatureMap::history2(data.p2())};
  }
  bool operator==(const Stage2Spec&) const = default;
};

// Least-squares fit of the second-stage model plus residuals.
struct FittedStage2 {
  Stage2Spec spec;
  Eigen::VectorXd beta20;     // main-effect coefficients
  Eigen::VectorXd beta21;     // interaction coefficients
  Eigen::VectorXd residuals;  // e_i = y_i - m(h2i) - a2i * c(h2i)
  std::uint64_t data_hash = 0;

  double sigma_hat() const;  // residual standard deviation (divisor n)
};

FittedStage2 fit_stage2(const Dataset& data, const Stage2Spec& spec);

// Linear predictor values for a prebuilt feature vector.
double m_hat(const FittedStage2& fit, const History2& h2_main);
double c_hat(const FittedStage2& fit, const History2& h2_interaction);

// Same, built from raw history pieces through the fit's feature maps.
double m_hat(const FittedStage2& fit, const Eigen::VectorXd& x1, int a1,
             const Eigen::VectorXd& x2);
double c_hat(const FittedStage2& fit, const Eigen::VectorXd& x1, int a1,
             const Eigen::VectorXd& x2);

// The estimated second-stage rule h2 -> sgn(c_hat(h2)). All estimators in
// the library share this rule; it does not depend on lambda or tau.
Regime::Rule2 pi2_star(std::shared_ptr<const FittedStage2> fit);

}  // namespace iqlearn
