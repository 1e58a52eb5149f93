#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace iqlearn {

// Least squares via rank-revealing column-pivoted QR (relative pivot
// tolerance 1e-12). Throws NumericalError naming the collinear columns on
// rank deficiency. Deterministic.
Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& design,
                                    const Eigen::VectorXd& response,
                                    const std::vector<std::string>& col_names);

// Unpenalized logistic regression by Newton-Raphson with step halving.
// y must be 0/1. Throws NumericalError on separation (coefficient norm
// blows past 1e3) or non-convergence. Returns the coefficient vector and
// reports the iteration count through *iters when non-null.
Eigen::VectorXd fit_logistic(const Eigen::MatrixXd& design,
                             const Eigen::VectorXd& y,
                             const std::vector<std::string>& col_names,
                             int max_iter = 50, double grad_tol = 1e-8,
                             int* iters = nullptr);

}  // namespace iqlearn
