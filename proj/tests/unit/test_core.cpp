#include <doctest.h>

#include <limits>

#include "iqlearn/core.hpp"
#include "iqlearn/rng.hpp"

using namespace iqlearn;

namespace {

Trajectory make_row(double x1a, double x1b, int a1, double x2a, double x2b,
                    int a2, double y) {
  Trajectory t;
  t.x1 = Eigen::Vector2d(x1a, x1b);
  t.a1 = a1;
  t.x2 = Eigen::Vector2d(x2a, x2b);
  t.a2 = a2;
  t.y = y;
  return t;
}

std::vector<Trajectory> three_rows() {
  return {make_row(0.1, 0.2, 1, 0.3, 0.4, -1, 1.0),
          make_row(1.1, -0.2, -1, 0.5, -0.4, 1, 2.0),
          make_row(-0.1, 2.2, 1, -0.3, 1.4, -1, 0.5)};
}

}  // namespace

TEST_CASE("sgn follows the tie convention") {
  CHECK(sgn(0.0) == 1);
  CHECK(sgn(-3.2) == -1);
  CHECK(sgn(7.0) == 1);
  CHECK(sgn(-0.0) == 1);  // -0.0 >= 0
  CHECK_THROWS_AS(sgn(std::numeric_limits<double>::quiet_NaN()), NumericalError);
  CHECK_THROWS_AS(sgn(std::numeric_limits<double>::infinity()), NumericalError);
}

TEST_CASE("sgn is invariant to positive scaling") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.normal();
    const double c = std::exp(3.0 * rng.normal());
    CHECK(sgn(c * x) == sgn(x));
  }
}

TEST_CASE("validate_dataset accepts well-formed rows") {
  const Dataset d = Dataset::validate(three_rows());
  CHECK(d.n() == 3);
  CHECK(d.p1() == 2);
  CHECK(d.p2() == 2);
}

TEST_CASE("validate_dataset rejects bad treatment codes with the row index") {
  auto rows = three_rows();
  rows[1].a1 = 0;
  CHECK_THROWS_WITH_AS(Dataset::validate(rows),
                       "invalid treatment code at row 1", DataError);
}

TEST_CASE("validate_dataset rejects dimension mismatches") {
  auto rows = three_rows();
  rows[2].x2 = Eigen::Vector3d(1.0, 2.0, 3.0);
  CHECK_THROWS_WITH_AS(Dataset::validate(rows),
                       "covariate dimension mismatch at row 2", DataError);
}

TEST_CASE("validate_dataset rejects non-finite values") {
  auto rows = three_rows();
  rows[0].y = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(Dataset::validate(rows), "non-finite value at row 0",
                       DataError);
}

TEST_CASE("re-validating a dataset is a no-op") {
  const Dataset d = Dataset::validate(three_rows());
  const Dataset d2 = Dataset::validate(d.rows());
  CHECK(d.hash() == d2.hash());
  CHECK(d.n() == d2.n());
}

TEST_CASE("history1 prepends the constant") {
  const History1 h = make_history1(Eigen::Vector2d(3.0, -1.0));
  CHECK(h.size() == 3);
  CHECK(h(0) == 1.0);
  CHECK(h(1) == 3.0);
  CHECK(h(2) == -1.0);
}

TEST_CASE("feature maps build and name columns") {
  FeatureMap h2 = FeatureMap::history2(2);
  CHECK(h2.dim() == 3);
  const Eigen::VectorXd v =
      h2.build(Eigen::Vector2d(9.0, 9.0), -1, Eigen::Vector2d(0.5, -0.5));
  CHECK(v(0) == 1.0);
  CHECK(v(1) == 0.5);
  CHECK(v(2) == -0.5);
  CHECK(h2.names() == std::vector<std::string>{"1", "x2_1", "x2_2"});

  FeatureMap stard = FeatureMap::history2(2);
  stard.include_a1 = true;
  CHECK(stard.dim() == 4);
  const Eigen::VectorXd w =
      stard.build(Eigen::Vector2d(9.0, 9.0), -1, Eigen::Vector2d(0.5, -0.5));
  CHECK(w(1) == -1.0);
  CHECK(stard.names() == std::vector<std::string>{"1", "a1", "x2_1", "x2_2"});

  FeatureMap h1 = FeatureMap::history1(2);
  CHECK(h1.build(Eigen::Vector2d(2.0, 4.0)) ==
        Eigen::Vector3d(1.0, 2.0, 4.0));
  CHECK_THROWS_AS(stard.build(Eigen::Vector2d(1.0, 1.0)), DataError);
}

TEST_CASE("regimes return only -1 or +1") {
  const Regime good = Regime::constant(1, -1);
  CHECK(good.pi1(Eigen::Vector2d(0, 0)) == 1);
  CHECK(good.pi2(Eigen::Vector2d(0, 0), 1, Eigen::Vector2d(0, 0)) == -1);
  const Regime bad([](const Eigen::VectorXd&) { return 0; },
                   [](const Eigen::VectorXd&, int, const Eigen::VectorXd&) {
                     return 2;
                   });
  CHECK_THROWS_AS(bad.pi1(Eigen::Vector2d(0, 0)), NumericalError);
  CHECK_THROWS_AS(bad.pi2(Eigen::Vector2d(0, 0), 1, Eigen::Vector2d(0, 0)),
                  NumericalError);
  CHECK_THROWS_AS(Regime::constant(0, 1), DataError);
}
