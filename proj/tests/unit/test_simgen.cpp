#include <doctest.h>

#include <cmath>

#include "iqlearn/math.hpp"
#include "iqlearn/parallel.hpp"
#include "iqlearn/simgen.hpp"

using namespace iqlearn;

TEST_CASE("default configuration carries the reference parameters") {
  const GenerativeConfig g = GenerativeConfig::defaults(GenVariant::Gaussian, 0.5);
  CHECK(g.gamma0 == Eigen::Vector3d(1.0, 0.5, 0.0));
  CHECK(g.gamma1 == Eigen::Vector3d(-1.0, -0.5, 0.0));
  CHECK(g.beta20 == Eigen::Vector3d(0.25, -1.0, 0.5));
  CHECK(g.beta21 == Eigen::Vector3d(1.0, -0.5, -0.25));
  CHECK(g.B_plus(0, 0) == -0.1);
  CHECK(g.B_plus(0, 1) == -0.1);
  CHECK(g.B_plus(1, 0) == 0.1);
  CHECK(g.B_plus(1, 1) == 0.1);
  CHECK(g.B_minus(0, 0) == 0.5);
  CHECK(g.B_minus(0, 1) == -0.1);
  CHECK(g.B_minus(1, 0) == -0.1);
  CHECK(g.B_minus(1, 1) == 0.5);
  CHECK(g.rho == 0.5);
  CHECK_THROWS_AS(GenerativeConfig::defaults(GenVariant::Gaussian, 1.5), DataError);
}

TEST_CASE("C = 0 removes the noise scaling entirely") {
  const GenerativeConfig g = GenerativeConfig::defaults(GenVariant::Gaussian, 0.0);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector2d x1(rng.normal(), rng.normal());
    CHECK(g.eta(x1, 1) == 1.0);
    CHECK(g.eta(x1, -1) == 1.0);
  }
}

TEST_CASE("conditional mean of X2 matches the transition matrix") {
  const GenerativeConfig g = GenerativeConfig::defaults(GenVariant::Gaussian, 0.0);
  const int N = 1000000;
  const Dataset d = generate(g, N, 5);
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  Eigen::Vector2d sumsq = Eigen::Vector2d::Zero();
  int count = 0;
  for (int i = 0; i < N; ++i) {
    const auto& r = d.row(i);
    if (r.a1 != 1) continue;
    sum += r.x2;
    sumsq += r.x2.cwiseProduct(r.x2);
    ++count;
  }
  const Eigen::Vector2d mean = sum / count;
  // E[X2 | A1 = +1] = B_plus (1,1)' = (-0.2, 0.2)
  for (int j = 0; j < 2; ++j) {
    const double var = sumsq(j) / count - mean(j) * mean(j);
    const double se = std::sqrt(var / count);
    CHECK(std::fabs(mean(j) - (j == 0 ? -0.2 : 0.2)) < 4.0 * se);
  }
}

TEST_CASE("skew-variant noise is standardized with the right skewness") {
  for (double C : {0.0, 0.5, 1.0}) {
    const GenerativeConfig g = GenerativeConfig::defaults(GenVariant::ChisqSkew, C);
    const double df = 10.0 * C + 1.0;
    Rng rng(7 + static_cast<std::uint64_t>(10 * C));
    const int N = 1000000;
    double m1 = 0.0, m2 = 0.0, m3 = 0.0;
    for (int i = 0; i < N; ++i) {
      const double xi = g.draw_xi(rng);
      m1 += xi;
      m2 += xi * xi;
      m3 += xi * xi * xi;
    }
    m1 /= N;
    m2 /= N;
    m3 /= N;
    CHECK(std::fabs(m1) < 4.0 / std::sqrt(static_cast<double>(N)) * 2.0);
    CHECK(m2 - m1 * m1 == doctest::Approx(1.0).epsilon(0.02));
    const double skew = (m3 - 3 * m1 * m2 + 2 * m1 * m1 * m1) /
                        std::pow(m2 - m1 * m1, 1.5);
    CHECK(skew == doctest::Approx(std::sqrt(8.0 / df)).epsilon(0.1));
    CHECK(skew > 0.0);
  }
}

TEST_CASE("skew variant fixes the scaling exponent at one half") {
  const GenerativeConfig g = GenerativeConfig::defaults(GenVariant::ChisqSkew, 0.0);
  const Eigen::Vector2d x1(1.0, 1.0);
  const Eigen::Vector3d h1(1.0, 1.0, 1.0);
  const double expected =
      std::exp(0.5 * (h1.dot(g.gamma0) + h1.dot(g.gamma1)));
  CHECK(g.eta(x1, 1) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("treatments are independent of covariates") {
  const GenerativeConfig g = GenerativeConfig::defaults(GenVariant::Gaussian, 0.5);
  const int N = 100000;
  const Dataset d = generate(g, N, 9);
  auto corr = [&](auto get_a, auto get_x) {
    double ma = 0, mx = 0;
    for (int i = 0; i < N; ++i) {
      ma += get_a(d.row(i));
      mx += get_x(d.row(i));
    }
    ma /= N;
    mx /= N;
    double cab = 0, ca = 0, cb = 0;
    for (int i = 0; i < N; ++i) {
      const double da = get_a(d.row(i)) - ma;
      const double dx = get_x(d.row(i)) - mx;
      cab += da * dx;
      ca += da * da;
      cb += dx * dx;
    }
    return cab / std::sqrt(ca * cb);
  };
  const double bound = 4.0 / std::sqrt(static_cast<double>(N));
  CHECK(std::fabs(corr([](const Trajectory& r) { return double(r.a1); },
                       [](const Trajectory& r) { return r.x1(0); })) < bound);
  CHECK(std::fabs(corr([](const Trajectory& r) { return double(r.a2); },
                       [](const Trajectory& r) { return r.x2(1); })) < bound);
  CHECK(std::fabs(corr([](const Trajectory& r) { return double(r.a1); },
                       [](const Trajectory& r) { return double(r.a2); })) < bound);
}

TEST_CASE("C = 0 makes the X2 spread treatment-free") {
  const GenerativeConfig g = GenerativeConfig::defaults(GenVariant::Gaussian, 0.0);
  const int N = 100000;
  const Dataset d = generate(g, N, 13);
  // residual spread around the conditional mean B_{a1} x1
  double ss_plus = 0, ss_minus = 0;
  int n_plus = 0, n_minus = 0;
  for (int i = 0; i < N; ++i) {
    const auto& r = d.row(i);
    const Eigen::Matrix2d& B = r.a1 == 1 ? g.B_plus : g.B_minus;
    const Eigen::Vector2d resid =
        r.x2 - B * Eigen::Vector2d(r.x1(0), r.x1(1));
    if (r.a1 == 1) {
      ss_plus += resid.squaredNorm();
      n_plus += 2;
    } else {
      ss_minus += resid.squaredNorm();
      n_minus += 2;
    }
  }
  const double ratio = (ss_plus / n_plus) / (ss_minus / n_minus);
  CHECK(ratio > 0.9);
  CHECK(ratio < 1.1);
}

TEST_CASE("consistent-subgroup evaluation hits the tail limits") {
  const GenerativeConfig g = GenerativeConfig::defaults(GenVariant::Gaussian, 0.0);
  const Regime regime = Regime::constant(1, 1);
  CHECK(evaluate_regime_prob(g, regime, -1e9, 2000, 3) == 1.0);
  CHECK(evaluate_regime_prob(g, regime, 1e9, 2000, 3) == 0.0);
}

TEST_CASE("fixed-regime evaluation matches an arm-restricted oracle") {
  const GenerativeConfig g = GenerativeConfig::defaults(GenVariant::Gaussian, 0.0);
  const Regime regime = Regime::constant(1, 1);
  const int N = 200000;
  const double est = evaluate_regime_prob(g, regime, 2.0, N, 17);
  // oracle: force both arms directly
  Rng rng(55);
  const int M = 400000;
  double hits = 0;
  for (int k = 0; k < M; ++k) {
    const Trajectory t = simulate_one(g, rng, 1, 1);
    hits += t.y > 2.0 ? 1.0 : 0.0;
  }
  const double oracle = hits / M;
  const double se = std::sqrt(oracle * (1 - oracle) * (1.0 / (N / 4.0) + 1.0 / M));
  CHECK(std::fabs(est - oracle) < 3.0 * se);
}

TEST_CASE("subgroup quantiles use the lower step convention") {
  CHECK(empirical_quantile({1, 2, 3, 4}, 0.5) == 2.0);
  CHECK(empirical_quantile({1, 2, 3, 4}, 0.95) == 4.0);
  CHECK(empirical_quantile({4, 3, 2, 1}, 0.25) == 1.0);
  CHECK_THROWS_AS(empirical_quantile({}, 0.5), NumericalError);
  CHECK_THROWS_AS(empirical_quantile({1.0}, 0.0), DataError);
}

TEST_CASE("quantile evaluation matches an arm-restricted oracle") {
  const GenerativeConfig g = GenerativeConfig::defaults(GenVariant::Gaussian, 0.5);
  const Regime regime = Regime::constant(-1, 1);
  const double est = evaluate_regime_quantile(g, regime, 0.25, 100000, 19);
  Rng rng(77);
  std::vector<double> ys;
  for (int k = 0; k < 200000; ++k)
    ys.push_back(simulate_one(g, rng, -1, 1).y);
  const double oracle = empirical_quantile(ys, 0.25);
  CHECK(std::fabs(est - oracle) < 0.05);
}

TEST_CASE("experiment rows have the expected shape and determinism") {
  ExperimentConfig cfg;
  cfg.C_values = {0.0};
  cfg.lambdas = {2.0};
  cfg.J = 2;
  cfg.n = 60;
  cfg.N = 300;
  cfg.seed = 7;
  cfg.mc_draws = 500;
  const ExperimentResult a = run_experiment(cfg);
  CHECK(a.rows.size() + a.failures.size() == 2 * 4);
  const ExperimentResult b = run_experiment(cfg);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].value == b.rows[i].value);
    CHECK(a.rows[i].n_consistent == b.rows[i].n_consistent);
  }
  const auto summary = a.summary();
  CHECK(!summary.empty());
}

TEST_CASE("experiment results are independent of the thread cap") {
  ExperimentConfig cfg;
  cfg.C_values = {0.0, 0.5};
  cfg.lambdas = {1.0};
  cfg.J = 2;
  cfg.n = 50;
  cfg.N = 200;
  cfg.seed = 21;
  cfg.mc_draws = 300;
  set_max_threads(1);
  const ExperimentResult a = run_experiment(cfg);
  set_max_threads(4);
  const ExperimentResult b = run_experiment(cfg);
  set_max_threads(0);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].value == b.rows[i].value);
    CHECK(a.rows[i].rep == b.rows[i].rep);
  }
}

TEST_CASE("quantile experiments reject threshold-only estimators") {
  ExperimentConfig cfg;
  cfg.taus = {0.5};
  cfg.estimators = {EstimatorKind::Tiq};
  CHECK_THROWS_AS(run_experiment(cfg), DataError);
  cfg.estimators = {EstimatorKind::BinaryQ};
  CHECK_THROWS_AS(run_experiment(cfg), DataError);
  ExperimentConfig both;
  both.lambdas = {1.0};
  both.taus = {0.5};
  CHECK_THROWS_AS(run_experiment(both), DataError);
}
