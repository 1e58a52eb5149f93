#include "iqlearn/linreg.hpp"

#include <cmath>

#include "iqlearn/core.hpp"

namespace iqlearn {

Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& design,
                                    const Eigen::VectorXd& response,
                                    const std::vector<std::string>& col_names) {
  if (design.rows() != response.size())
    throw DataError("least squares: design/response length mismatch");
  if (design.rows() < design.cols())
    throw NumericalError("least squares: fewer rows than columns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-12);
  if (qr.rank() < design.cols()) {
    // Pivoting pushes dependent columns to the back of the permutation.
    std::string bad;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < design.cols(); ++k) {
      if (!bad.empty()) bad += ", ";
      const auto col = static_cast<size_t>(perm(k));
      bad += col < col_names.size() ? col_names[col] : "col" + std::to_string(col);
    }
    throw NumericalError("rank-deficient design; collinear columns: " + bad);
  }
  return qr.solve(response);
}

Eigen::VectorXd fit_logistic(const Eigen::MatrixXd& design,
                             const Eigen::VectorXd& y,
                             const std::vector<std::string>& col_names,
                             int max_iter, double grad_tol, int* iters) {
  const Eigen::Index n = design.rows(), p = design.cols();
  if (y.size() != n) throw DataError("logistic: design/response length mismatch");
  const double ysum = y.sum();
  if (ysum <= 0.0 || ysum >= static_cast<double>(n))
    throw DataError("logistic: outcome has a single class");

  auto nll = [&](const Eigen::VectorXd& beta) {
    const Eigen::ArrayXd eta = (design * beta).array();
    // log(1 + e^eta) - y*eta, computed stably
    return ((1.0 + (-eta.abs()).exp()).log() + eta.max(0.0) - y.array() * eta)
        .sum();
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double cur = nll(beta);
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::ArrayXd eta = (design * beta).array();
    const Eigen::ArrayXd mu = 1.0 / (1.0 + (-eta).exp());
    const Eigen::VectorXd grad = design.transpose() * (y.array() - mu).matrix();
    if (grad.norm() < grad_tol) {
      if (iters) *iters = it - 1;
      return beta;
    }
    const Eigen::ArrayXd w = mu * (1.0 - mu);
    const Eigen::MatrixXd hess =
        design.transpose() * w.matrix().asDiagonal() * design;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("logistic: singular information matrix");
    Eigen::VectorXd step = ldlt.solve(grad);
    double scale = 1.0;
    Eigen::VectorXd cand = beta + step;
    double cand_nll = nll(cand);
    int halvings = 0;
    while (cand_nll > cur + 1e-12 && halvings < 30) {
      scale *= 0.5;
      cand = beta + scale * step;
      cand_nll = nll(cand);
      ++halvings;
    }
    beta = cand;
    cur = cand_nll;
    if (beta.norm() > 1e3) {
      std::string what = "logistic: separation suspected (coefficient norm ";
      what += std::to_string(beta.norm()) + ")";
      (void)col_names;
      throw NumericalError(what);
    }
  }
  const Eigen::ArrayXd eta = (design * beta).array();
  const Eigen::ArrayXd mu = 1.0 / (1.0 + (-eta).exp());
  const double gn = (design.transpose() * (y.array() - mu).matrix()).norm();
  if (gn >= grad_tol)
    throw NumericalError("logistic: no convergence after " +
                         std::to_string(max_iter) +
                         " iterations (gradient norm " + std::to_string(gn) + ")");
  if (iters) *iters = max_iter;
  return beta;
}

}  // namespace iqlearn
