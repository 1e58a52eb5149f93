#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "iqlearn/math.hpp"
#include "iqlearn/core.hpp"
#include "iqlearn/residual_cdf.hpp"
#include "iqlearn/rng.hpp"

using namespace iqlearn;

namespace {

// Series-based standard normal CDF (independent of math.cpp's erfc path).
double phi_series(double z) {
  double term = z, sum = z;
  for (int k = 1; k < 400; ++k) {
    term *= z * z / (2.0 * k + 1.0);
    sum += term;
    if (std::fabs(term) < 1e-18 * std::fabs(sum)) break;
  }
  return 0.5 + 0.3989422804014326779 * std::exp(-0.5 * z * z) * sum;
}

double sup_distance_to_normal(const ResidualCdf& f,
                              const std::vector<double>& sorted) {
  double sup = 0.0;
  const auto n = static_cast<double>(sorted.size());
  for (size_t i = 0; i < sorted.size(); ++i) {
    const double phi = norm_cdf(sorted[i]);
    sup = std::max(sup, std::fabs((static_cast<double>(i) + 1.0) / n - phi));
    sup = std::max(sup, std::fabs(static_cast<double>(i) / n - phi));
  }
  (void)f;
  return sup;
}

}  // namespace

TEST_CASE("normal-scale estimator on {-1, 1}") {
  Eigen::VectorXd r(2);
  r << -1.0, 1.0;
  const ResidualCdf f = ResidualCdf::normal_scale(r);
  CHECK(f.sigma_hat() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(f(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(f(1.959964) == doctest::Approx(phi_series(1.959964)).epsilon(1e-12));
  CHECK(f(1.959964) == doctest::Approx(0.975).epsilon(1e-6));
}

TEST_CASE("normal-scale estimator rejects degenerate residuals") {
  Eigen::VectorXd r(3);
  r << 0.7, 0.7, 0.7;
  CHECK_THROWS_AS(ResidualCdf::normal_scale(r), NumericalError);
  Eigen::VectorXd one(1);
  one << 0.0;
  CHECK_THROWS_AS(ResidualCdf::normal_scale(one), DataError);
}

TEST_CASE("normal-scale estimator is scale equivariant") {
  Rng rng(2);
  Eigen::VectorXd r(50);
  for (int i = 0; i < 50; ++i) r(i) = rng.normal();
  const ResidualCdf f = ResidualCdf::normal_scale(r);
  const double c = 4.0;  // power of two: scaling is exact in floating point
  const ResidualCdf fc = ResidualCdf::normal_scale(c * r);
  for (double z : {-2.0, -0.5, 0.0, 0.25, 1.5})
    CHECK(fc(c * z) == f(z));
}

TEST_CASE("empirical estimator counts ties with <=") {
  Eigen::VectorXd r(3);
  r << -1.0, 0.0, 2.0;
  const ResidualCdf f = ResidualCdf::empirical(r);
  CHECK(f(0.0) == doctest::Approx(2.0 / 3.0));
  CHECK(f(-2.0) == 0.0);
  CHECK(f(2.0) == 1.0);
  CHECK(f(2.0 - 1e-12) == doctest::Approx(2.0 / 3.0));
  CHECK(f(-1.0) == doctest::Approx(1.0 / 3.0));
  // extremes
  CHECK(f(-1.0 - 1e-9) == 0.0);
}

TEST_CASE("every variant is a valid CDF on random grids") {
  Rng rng(7);
  Eigen::VectorXd r(40);
  for (int i = 0; i < 40; ++i) r(i) = 2.0 * rng.normal() + 0.3;
  Eigen::MatrixXd z(40, 2);
  for (int i = 0; i < 40; ++i) z.row(i) << 1.0, rng.normal();
  const ResidualCdf variants[] = {ResidualCdf::normal_scale(r),
                                  ResidualCdf::empirical(r),
                                  ResidualCdf::hetero_scale(r, z)};
  const Eigen::Vector2d z_row(1.0, 0.4);
  for (const auto& f : variants) {
    double prev = 0.0;
    for (double zz = -30.0; zz <= 30.0; zz += 0.37) {
      const double v = f.kind() == CdfKind::HeteroScale ? f(zz, z_row) : f(zz);
      CHECK(v >= prev);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      prev = v;
    }
    const double lo = f.kind() == CdfKind::HeteroScale ? f(-1e8, z_row) : f(-1e8);
    const double hi = f.kind() == CdfKind::HeteroScale ? f(1e8, z_row) : f(1e8);
    CHECK(lo == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(hi == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("hetero-scale with intercept-only model matches standardized empirical") {
  Rng rng(11);
  Eigen::VectorXd r(60);
  for (int i = 0; i < 60; ++i) r(i) = 1.7 * rng.normal();
  Eigen::MatrixXd z = Eigen::MatrixXd::Ones(60, 1);
  const ResidualCdf hetero = ResidualCdf::hetero_scale(r, z);
  const double scale = hetero.scale_at(Eigen::VectorXd::Ones(1));
  const ResidualCdf emp = ResidualCdf::empirical(r / scale);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  for (double zz = -6.0; zz <= 6.0; zz += 0.43)
    CHECK(hetero(zz, one) == doctest::Approx(emp(zz / scale)).epsilon(1e-12));
}

TEST_CASE("hetero-scale recovers a log-linear scale on synthetic data") {
  // sigma(x) = exp(0.5 x): fitted slope within 0.1 at n = 5000
  Rng rng(13);
  const int n = 5000;
  Eigen::VectorXd r(n);
  Eigen::MatrixXd z(n, 2);
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    z.row(i) << 1.0, x;
    r(i) = std::exp(0.5 * x) * rng.normal();
  }
  const ResidualCdf f = ResidualCdf::hetero_scale(r, z);
  CHECK(f.scale_coef()(1) == doctest::Approx(0.5).epsilon(0.2));
  CHECK(std::fabs(f.scale_coef()(1) - 0.5) < 0.1);
  // intercept close to zero (bias correction working)
  CHECK(std::fabs(f.scale_coef()(0)) < 0.1);
  // exp link keeps every fitted scale positive
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d probe(1.0, 4.0 * rng.normal());
    CHECK(f.scale_at(probe) > 0.0);
  }
}

TEST_CASE("empirical CDF converges to the normal uniformly") {
  double prev_sup = 1.0;
  for (int n : {100, 1000, 10000}) {
    Rng rng(101);
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r(i) = rng.normal();
    const ResidualCdf f = ResidualCdf::empirical(r);
    std::vector<double> sorted(r.data(), r.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const double sup = sup_distance_to_normal(f, sorted);
    CHECK(sup < prev_sup);
    prev_sup = sup;
    if (n == 10000) CHECK(sup < 0.03);
  }
}

TEST_CASE("qq export pairs ordered residuals with scaled normal quantiles") {
  Rng rng(19);
  Eigen::VectorXd r(30);
  for (int i = 0; i < 30; ++i) r(i) = rng.normal();
  const ResidualCdf f = ResidualCdf::normal_scale(r);
  const auto pairs = f.qq_pairs();
  REQUIRE(pairs.size() == 30);
  for (size_t i = 1; i < pairs.size(); ++i) {
    CHECK(pairs[i].first > pairs[i - 1].first);
    CHECK(pairs[i].second >= pairs[i - 1].second);
  }
  CHECK(pairs[15].first ==
        doctest::Approx(f.sigma_hat() * norm_quantile(15.5 / 30.0)));
}

TEST_CASE("hetero-scale variant requires covariates at evaluation") {
  Eigen::VectorXd r(12);
  Rng rng(3);
  for (int i = 0; i < 12; ++i) r(i) = rng.normal();
  const ResidualCdf f = ResidualCdf::hetero_scale(r, Eigen::MatrixXd::Ones(12, 1));
  CHECK_THROWS_AS(f(0.5), NumericalError);
}
