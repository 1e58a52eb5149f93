#include "iqlearn/residual_cdf.hpp"

#include <algorithm>
#include <cmath>

#include "iqlearn/core.hpp"
#include "iqlearn/linreg.hpp"
#include "iqlearn/math.hpp"

namespace iqlearn {

namespace {

// -E[log|N(0,1)|]; added to the log|e| regression fit so that
// exp(fitted value) estimates the scale rather than the geometric mean.
constexpr double kHalfNormalLogBias = 0.6351814;

std::vector<double> sorted_vector(const Eigen::VectorXd& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  std::sort(out.begin(), out.end());
  return out;
}

double step_cdf(const std::vector<double>& sorted, double z) {
  if (sorted.empty())
    throw NumericalError("residual CDF evaluated before fitting");
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), z);
  return static_cast<double>(it - sorted.begin()) /
         static_cast<double>(sorted.size());
}

}  // namespace

ResidualCdf ResidualCdf::normal_scale(const Eigen::VectorXd& residuals) {
  if (residuals.size() < 2)
    throw DataError("normal-scale CDF requires at least 2 residuals");
  const double n = static_cast<double>(residuals.size());
  const double s2 = residuals.squaredNorm() / n;
  if (residuals.maxCoeff() == residuals.minCoeff() || !(s2 > 0.0))
    throw NumericalError("normal-scale CDF: residuals have zero variance");
  ResidualCdf f;
  f.kind_ = CdfKind::NormalScale;
  f.sigma_ = std::sqrt(s2);
  f.sorted_ = sorted_vector(residuals);
  return f;
}

ResidualCdf ResidualCdf::empirical(const Eigen::VectorXd& residuals) {
  if (residuals.size() < 1)
    throw DataError("empirical CDF requires at least 1 residual");
  ResidualCdf f;
  f.kind_ = CdfKind::Empirical;
  f.sorted_ = sorted_vector(residuals);
  return f;
}

ResidualCdf ResidualCdf::hetero_scale(const Eigen::VectorXd& residuals,
                                      const Eigen::MatrixXd& scale_features) {
  const Eigen::Index n = residuals.size();
  if (scale_features.rows() != n)
    throw DataError("hetero-scale CDF: feature/residual length mismatch");
  Eigen::VectorXd log_abs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = std::fabs(residuals(i));
    // Zero residuals carry no scale information; floor them far below the
    // data scale instead of letting log(0) poison the fit.
    log_abs(i) = std::log(std::max(a, 1e-300));
  }
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < scale_features.cols(); ++j)
    names.push_back("scale:z" + std::to_string(j));
  Eigen::VectorXd coef = solve_least_squares(scale_features, log_abs, names);
  coef(0) += kHalfNormalLogBias;

  ResidualCdf f;
  f.kind_ = CdfKind::HeteroScale;
  f.scale_coef_ = coef;
  Eigen::VectorXd standardized(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = std::exp(scale_features.row(i).dot(coef));
    if (!(s > 0.0) || !std::isfinite(s))
      throw NumericalError("hetero-scale CDF: nonpositive fitted scale");
    standardized(i) = residuals(i) / s;
  }
  f.sorted_ = sorted_vector(standardized);
  return f;
}

double ResidualCdf::operator()(double z) const {
  switch (kind_) {
    case CdfKind::NormalScale:
      return norm_cdf(z / sigma_);
    case CdfKind::Empirical:
      return step_cdf(sorted_, z);
    case CdfKind::HeteroScale:
      throw NumericalError(
          "hetero-scale CDF evaluation requires scale covariates");
  }
  return 0.0;
}

double ResidualCdf::operator()(double z, const Eigen::VectorXd& z_row) const {
  if (kind_ != CdfKind::HeteroScale)
    return (*this)(z);
  const double s = scale_at(z_row);
  return step_cdf(sorted_, z / s);
}

double ResidualCdf::sigma_hat() const {
  if (kind_ != CdfKind::NormalScale)
    throw NumericalError("sigma_hat is defined for the normal-scale variant");
  return sigma_;
}

const Eigen::VectorXd& ResidualCdf::scale_coef() const {
  if (kind_ != CdfKind::HeteroScale)
    throw NumericalError("scale_coef is defined for the hetero-scale variant");
  return scale_coef_;
}

double ResidualCdf::scale_at(const Eigen::VectorXd& z_row) const {
  if (kind_ != CdfKind::HeteroScale)
    throw NumericalError("scale_at is defined for the hetero-scale variant");
  if (z_row.size() != scale_coef_.size())
    throw DataError("hetero-scale CDF: covariate dimension mismatch");
  const double s = std::exp(z_row.dot(scale_coef_));
  if (!(s > 0.0) || !std::isfinite(s))
    throw NumericalError("hetero-scale CDF: nonpositive fitted scale");
  return s;
}

std::vector<std::pair<double, double>> ResidualCdf::qq_pairs() const {
  const size_t n = sorted_.size();
  double sd;
  if (kind_ == CdfKind::NormalScale) {
    sd = sigma_;
  } else {
    double mean = 0.0, sq = 0.0;
    for (double e : sorted_) mean += e;
    mean /= static_cast<double>(n);
    for (double e : sorted_) sq += (e - mean) * (e - mean);
    sd = std::sqrt(sq / static_cast<double>(n));
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    out.emplace_back(sd * norm_quantile(p), sorted_[i]);
  }
  return out;
}

}  // namespace iqlearn
