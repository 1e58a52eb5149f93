#include <doctest.h>

#include <Eigen/Dense>

#include "iqlearn/rng.hpp"
#include "iqlearn/stage2.hpp"

using namespace iqlearn;

namespace {

// Alternate algebraic route for least squares: normal equations via a
// full-pivot LU solve.
Eigen::VectorXd normal_equation_oracle(const Eigen::MatrixXd& X,
                                       const Eigen::VectorXd& y) {
  return Eigen::FullPivLU<Eigen::MatrixXd>(X.transpose() * X)
      .solve(X.transpose() * y);
}

Dataset random_dataset(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Trajectory> rows;
  for (int i = 0; i < n; ++i) {
    Trajectory t;
    t.x1 = Eigen::Vector2d(rng.normal(), rng.normal());
    t.a1 = rng.rademacher();
    t.x2 = Eigen::Vector2d(rng.normal(), rng.normal());
    t.a2 = rng.rademacher();
    t.y = 0.5 + t.x2(0) - 0.3 * t.x2(1) + t.a2 * (1.0 - 0.5 * t.x2(0)) +
          rng.normal();
    rows.push_back(std::move(t));
  }
  return Dataset::validate(std::move(rows));
}

FeatureMap intercept_only() { return FeatureMap{}; }

}  // namespace

TEST_CASE("noiseless intercept model interpolates exactly") {
  std::vector<Trajectory> rows;
  Rng rng(3);
  for (int i = 0; i < 8; ++i) {
    Trajectory t;
    t.x1 = Eigen::Vector2d(rng.normal(), rng.normal());
    t.a1 = rng.rademacher();
    t.x2 = Eigen::Vector2d(rng.normal(), rng.normal());
    t.a2 = rng.rademacher();
    t.y = 1.0 + t.a2;
    rows.push_back(std::move(t));
  }
  const Dataset d = Dataset::validate(std::move(rows));
  const Stage2Spec spec{intercept_only(), intercept_only()};
  const FittedStage2 fit = fit_stage2(d, spec);
  CHECK(fit.beta20.size() == 1);
  CHECK(fit.beta20(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.beta21(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("six-row fit matches the normal-equation oracle") {
  std::vector<Trajectory> rows;
  const double table[6][7] = {
      // x1_1  x1_2   a1  x2_1  x2_2   a2     y
      {0.2, -1.0, 1, 0.5, 1.2, 1, 2.1},   {1.4, 0.3, -1, -0.7, 0.1, -1, -0.4},
      {-0.6, 0.8, 1, 1.1, -0.9, 1, 1.7},  {0.9, -0.2, -1, 0.3, 0.8, -1, 0.2},
      {-1.2, 1.5, 1, -1.4, 0.6, 1, -1.0}, {0.4, 0.1, -1, 0.9, -1.1, -1, 0.9}};
  for (const auto& r : table) {
    Trajectory t;
    t.x1 = Eigen::Vector2d(r[0], r[1]);
    t.a1 = static_cast<int>(r[2]);
    t.x2 = Eigen::Vector2d(r[3], r[4]);
    t.a2 = static_cast<int>(r[5]);
    t.y = r[6];
    rows.push_back(std::move(t));
  }
  const Dataset d = Dataset::validate(std::move(rows));
  const Stage2Spec spec = Stage2Spec::defaults(d);
  const FittedStage2 fit = fit_stage2(d, spec);

  Eigen::MatrixXd X(6, 6);
  Eigen::VectorXd y(6);
  for (int i = 0; i < 6; ++i) {
    const auto& r = d.row(i);
    X.row(i) << 1.0, r.x2(0), r.x2(1), r.a2 * 1.0, r.a2 * r.x2(0),
        r.a2 * r.x2(1);
    y(i) = r.y;
  }
  const Eigen::VectorXd oracle = normal_equation_oracle(X, y);
  for (int j = 0; j < 3; ++j) {
    CHECK(fit.beta20(j) == doctest::Approx(oracle(j)).epsilon(1e-10));
    CHECK(fit.beta21(j) == doctest::Approx(oracle(3 + j)).epsilon(1e-10));
  }
}

TEST_CASE("constant second-stage treatment is rank deficient") {
  Rng rng(23);
  std::vector<Trajectory> rows;
  for (int i = 0; i < 20; ++i) {
    Trajectory t;
    t.x1 = Eigen::Vector2d(rng.normal(), rng.normal());
    t.a1 = rng.rademacher();
    t.x2 = Eigen::Vector2d(rng.normal(), rng.normal());
    t.a2 = 1;
    t.y = rng.normal();
    rows.push_back(std::move(t));
  }
  const Dataset d = Dataset::validate(std::move(rows));
  CHECK_THROWS_AS(fit_stage2(d, Stage2Spec::defaults(d)), NumericalError);
  try {
    fit_stage2(d, Stage2Spec::defaults(d));
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("rank-deficient") != std::string::npos);
    CHECK(std::string(e.what()).find("collinear") != std::string::npos);
  }
}

TEST_CASE("residuals satisfy the normal equations and are centered") {
  const Dataset d = random_dataset(200, 31);
  const FittedStage2 fit = fit_stage2(d, Stage2Spec::defaults(d));
  Eigen::MatrixXd X(d.n(), 6);
  for (int i = 0; i < d.n(); ++i) {
    const auto& r = d.row(i);
    X.row(i) << 1.0, r.x2(0), r.x2(1), r.a2 * 1.0, r.a2 * r.x2(0),
        r.a2 * r.x2(1);
  }
  const Eigen::VectorXd xtr = X.transpose() * fit.residuals;
  const double scale = X.norm() * fit.residuals.norm() + 1e-300;
  CHECK(xtr.cwiseAbs().maxCoeff() / scale < 1e-8);
  CHECK(std::fabs(fit.residuals.mean()) < 1e-10);
}

TEST_CASE("shifting Y by a constant moves only the intercept") {
  const Dataset d = random_dataset(120, 41);
  const FittedStage2 base = fit_stage2(d, Stage2Spec::defaults(d));
  const double k = 7.25;
  std::vector<Trajectory> shifted = d.rows();
  for (auto& r : shifted) r.y += k;
  const Dataset d2 = Dataset::validate(std::move(shifted));
  const FittedStage2 moved = fit_stage2(d2, Stage2Spec::defaults(d2));
  CHECK(moved.beta20(0) == doctest::Approx(base.beta20(0) + k).epsilon(1e-9));
  for (int j = 1; j < 3; ++j)
    CHECK(moved.beta20(j) == doctest::Approx(base.beta20(j)).epsilon(1e-9));
  for (int j = 0; j < 3; ++j)
    CHECK(moved.beta21(j) == doctest::Approx(base.beta21(j)).epsilon(1e-9));
  Rng rng(5);
  auto s2a = std::make_shared<const FittedStage2>(base);
  auto s2b = std::make_shared<const FittedStage2>(moved);
  const auto rule_a = pi2_star(s2a);
  const auto rule_b = pi2_star(s2b);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d x1(rng.normal(), rng.normal());
    const Eigen::Vector2d x2(rng.normal(), rng.normal());
    CHECK(rule_a(x1, 1, x2) == rule_b(x1, 1, x2));
  }
}

TEST_CASE("m_hat and c_hat are plain linear predictors") {
  FittedStage2 fit;
  fit.spec = Stage2Spec{FeatureMap::history2(2), FeatureMap::history2(2)};
  fit.beta20 = Eigen::Vector3d::Zero();
  fit.beta21 = Eigen::Vector3d(1.0, -0.5, -0.25);
  fit.residuals = Eigen::VectorXd::Zero(1);

  CHECK(m_hat(fit, Eigen::Vector3d(1.0, 2.0, 3.0)) == 0.0);
  CHECK(c_hat(fit, Eigen::Vector3d(1.0, 0.0, 0.0)) == 1.0);

  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d h2(1.0, rng.normal(), rng.normal());
    double dot = 0.0;  // hand oracle
    for (int j = 0; j < 3; ++j) dot += fit.beta21(j) * h2(j);
    CHECK(c_hat(fit, h2) == doctest::Approx(dot).epsilon(1e-14));
  }
  CHECK_THROWS_AS(m_hat(fit, Eigen::Vector2d(1.0, 2.0)), DataError);
}

TEST_CASE("pi2_star applies the sign convention") {
  FittedStage2 fit;
  fit.spec = Stage2Spec{FeatureMap::history2(2), FeatureMap::history2(2)};
  fit.beta20 = Eigen::Vector3d::Zero();
  fit.beta21 = Eigen::Vector3d(1.0, -0.5, -0.25);
  fit.residuals = Eigen::VectorXd::Zero(1);
  auto shared = std::make_shared<const FittedStage2>(fit);
  const auto rule = pi2_star(shared);
  // c = 0 at x2 = (2, 0): 1 - 1 - 0 = 0 -> +1 by the tie convention
  CHECK(rule(Eigen::Vector2d(0, 0), 1, Eigen::Vector2d(2.0, 0.0)) == 1);
  // c = 1 - 2 - 1 = -2 at x2 = (4, 4)
  CHECK(rule(Eigen::Vector2d(0, 0), 1, Eigen::Vector2d(4.0, 4.0)) == -1);
  // c = -0.1 at x2 = (2.2, 0)
  CHECK(rule(Eigen::Vector2d(0, 0), -1, Eigen::Vector2d(2.2, 0.0)) == -1);
}
