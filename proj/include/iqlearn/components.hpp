#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "iqlearn/conditional_joint.hpp"
#include "iqlearn/core.hpp"
#include "iqlearn/residual_cdf.hpp"
#include "iqlearn/stage2.hpp"

namespace iqlearn {

struct McConfig {
  int draws = 10000;
  std::uint64_t seed = 1;
};

struct FitConfig {
  Stage2Spec stage2;
  Stage1Spec stage1;
  CdfKind cdf = CdfKind::NormalScale;
  JointKind joint = JointKind::GaussianCopula;
  McConfig mc;
  VarFitOptions var_fit;

  static FitConfig defaults(const Dataset& data) {
    FitConfig c;
    c.stage2 = Stage2Spec::defaults(data);
    c.stage1 = Stage1Spec::defaults(data);
    return c;
  }
};

// Everything TIQ, QIQ and IQ-learning share: the stage-2 fit, the error
// CDF, the conditional joint of (m, c), and the Monte Carlo configuration.
// All fitted on one dataset (enforced by provenance hash).
struct Components {
  std::shared_ptr<const FittedStage2> stage2;
  ResidualCdf cdf;
  ConditionalJoint joint;
  McConfig mc;
  std::uint64_t data_hash = 0;
  std::vector<Eigen::VectorXd> train_x1;  // baseline histories, fit order

  int n_train() const { return static_cast<int>(train_x1.size()); }
  void check_provenance() const;
};

std::shared_ptr<const Components> fit_components(const Dataset& data,
                                                 const FitConfig& config);

}  // namespace iqlearn
