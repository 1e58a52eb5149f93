#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "iqlearn/core.hpp"
#include "iqlearn/residual_cdf.hpp"
#include "iqlearn/stage2.hpp"

namespace iqlearn {

enum class JointKind { GaussianCopula, BivariateKde };

// Feature maps for the first-stage mean/variance models
//   mu(h1, a1; theta) = h10' theta0 + a1 * (h11' theta1)
//   sigma^2(h1, a1; gamma) = exp{(h10', a1*h11')' gamma}.
struct Stage1Spec {
  FeatureMap main;
  FeatureMap interaction;

  static Stage1Spec defaults(const Dataset& data) {
    return {FeatureMap::history1(data.p1()), FeatureMap::history1(data.p1())};
  }
  bool operator==(const Stage1Spec&) const = default;
};

struct VarFitOptions {
  int max_iter = 100;
  double grad_tol = 1e-9;
};

// Least-squares coefficients for a linear mean model.
Eigen::VectorXd fit_mean_model(const Eigen::VectorXd& targets,
                               const Eigen::MatrixXd& design);

// Minimizes sum_i [sq_residuals_i - exp(z_i' gamma)]^2 by Gauss-Newton with
// step halving, initialized at gamma = (log mean(sq_residuals), 0, ..., 0).
// Throws NumericalError with the final gradient norm on non-convergence.
Eigen::VectorXd fit_var_model(const Eigen::VectorXd& sq_residuals,
                              const Eigen::MatrixXd& design,
                              const VarFitOptions& opts = {});

// Elementwise (targets - mu) / sigma.
Eigen::VectorXd standardized_residuals(const Eigen::VectorXd& targets,
                                       const Eigen::VectorXd& mu,
                                       const Eigen::VectorXd& sigma);

// Mean and variance models for one stage-2 summary (m or c) given (h1, a1).
struct MeanVarModel {
  Stage1Spec spec;
  Eigen::VectorXd theta;  // stacked (theta0, theta1)
  Eigen::VectorXd gamma;  // log-variance coefficients on the same design

  double mu(const Eigen::VectorXd& x1, int a1) const;
  double sigma2(const Eigen::VectorXd& x1, int a1) const;
  double sigma(const Eigen::VectorXd& x1, int a1) const;
};

// M paired draws of (m, c) values conditional on one (h1, a1).
struct JointSample {
  std::vector<double> u;  // m draws
  std::vector<double> v;  // c draws
};

// Joint conditional law of (m(H2), c(H2)) given (H1, A1): parametric mean
// and variance models plus a dependence model on the standardized
// residuals, either a Gaussian copula with empirical marginals or a
// product-Gaussian-kernel KDE with Silverman bandwidths.
struct ConditionalJoint {
  MeanVarModel m_model;
  MeanVarModel c_model;
  JointKind kind = JointKind::GaussianCopula;

  // Gaussian copula: normal-scores correlation plus marginal order
  // statistics for the inverse rank transform.
  double copula_r = 0.0;
  std::vector<double> sorted_em;
  std::vector<double> sorted_ec;

  // Bivariate KDE: residual cloud plus per-coordinate bandwidths.
  std::vector<double> kde_em;
  std::vector<double> kde_ec;
  double bandwidth_m = 0.0;
  double bandwidth_c = 0.0;

  std::uint64_t data_hash = 0;

  // Draws (e_m, e_c) from the dependence model, transformed through the
  // mean and variance models; deterministic given the seed, and the
  // underlying residual draws do not depend on (x1, a1), so calling with
  // the same seed for both arms yields common random numbers.
  JointSample sample(const Eigen::VectorXd& x1, int a1, int draws,
                     std::uint64_t seed) const;

  // w = u + |v| draws for both first-stage arms from one set of residual
  // draws (paired by index). This is the quantity every integral consumes.
  struct ArmW {
    std::vector<double> minus;
    std::vector<double> plus;
  };
  ArmW sample_w_arms(const Eigen::VectorXd& x1, int draws,
                     std::uint64_t seed) const;
};

// Fits mean/variance models for m_hat(H2i) and c_hat(H2i) and the chosen
// dependence model on the standardized residuals.
ConditionalJoint fit_conditional_joint(const Dataset& data,
                                       const FittedStage2& stage2,
                                       const Stage1Spec& spec, JointKind kind,
                                       const VarFitOptions& var_opts = {});

// Dependence-model fits on standardized residual vectors (n >= 10).
void fit_copula(const Eigen::VectorXd& e_m, const Eigen::VectorXd& e_c,
                ConditionalJoint& cj);
void fit_kde(const Eigen::VectorXd& e_m, const Eigen::VectorXd& e_c,
             ConditionalJoint& cj);

// Monte Carlo plug-in for the integral of F(y - u - |v|) dG: the average
// of F over the sample.
double i_integral(double y, const ResidualCdf& F, const JointSample& sample);
// Same plus the Monte Carlo standard error of the average.
std::pair<double, double> i_integral_se(double y, const ResidualCdf& F,
                                        const JointSample& sample);

// Derives the Monte Carlo stream id for a baseline history: a hash of the
// covariate bytes mixed with the seed, so decisions are deterministic
// functions of (seed, x1) regardless of patient order or thread count.
std::uint64_t mc_stream(std::uint64_t seed, const Eigen::VectorXd& x1);

namespace detail {
// Average of F(y - w) over draws; the integral I in terms of w = u + |v|.
double i_from_w(const std::vector<double>& w, const ResidualCdf& F, double y);
// Test hook: arbitrary transform in place of the CDF.
double i_from_w_fn(const std::vector<double>& w,
                   const std::function<double(double)>& F, double y);
}  // namespace detail

}  // namespace iqlearn
