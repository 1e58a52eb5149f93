#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace iqlearn {

enum class CdfKind { NormalScale, Empirical, HeteroScale };

// Estimator of the second-stage error distribution, evaluable at any real.
//
// NormalScale:  F(z) = Phi(z / sigma_hat), sigma_hat^2 = mean of squared
//               residuals (divisor n; residuals are mean-zero when the
//               stage-2 model has an intercept).
// Empirical:    right-continuous step function n^-1 sum 1(e_i <= z).
// HeteroScale:  log-linear scale model sigma(z_row) = exp(z_row' coef),
//               fitted by least squares on log|e| plus the half-normal
//               bias constant; evaluation at (z, z_row) is the empirical
//               CDF of the standardized residuals at z / sigma(z_row).
class ResidualCdf {
 public:
  static ResidualCdf normal_scale(const Eigen::VectorXd& residuals);
  static ResidualCdf empirical(const Eigen::VectorXd& residuals);
  // scale_features: one row of scale-model covariates per residual
  // (leading intercept column included by the caller).
  static ResidualCdf hetero_scale(const Eigen::VectorXd& residuals,
                                  const Eigen::MatrixXd& scale_features);

  // Homoskedastic variants only; HeteroScale requires the feature overload.
  double operator()(double z) const;
  // Heteroskedastic evaluation at covariates z_row.
  double operator()(double z, const Eigen::VectorXd& z_row) const;

  CdfKind kind() const { return kind_; }
  double sigma_hat() const;                       // NormalScale
  const Eigen::VectorXd& scale_coef() const;      // HeteroScale
  double scale_at(const Eigen::VectorXd& z_row) const;
  const std::vector<double>& sorted_residuals() const { return sorted_; }

  // (theoretical normal quantile, ordered residual) pairs for QQ plots,
  // theoretical quantiles scaled by the residual standard deviation.
  std::vector<std::pair<double, double>> qq_pairs() const;

  // An unfitted default evaluates to an error; fit with a factory above.
  ResidualCdf() = default;

 private:
  CdfKind kind_ = CdfKind::Empirical;
  double sigma_ = 0.0;                 // NormalScale
  std::vector<double> sorted_;         // Empirical / HeteroScale (standardized)
  Eigen::VectorXd scale_coef_;         // HeteroScale
};

}  // namespace iqlearn
