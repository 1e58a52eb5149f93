#pragma once

#include <optional>
#include <string>

#include "iqlearn/components.hpp"
#include "iqlearn/qiq.hpp"
#include "iqlearn/rng.hpp"

namespace iqlearn {

enum class GenVariant { Gaussian, ChisqSkew };

// Two-stage generative model:
//   X1 ~ Norm(1_2, Sigma), Sigma a correlation matrix with off-diagonal rho
//   A1, A2 ~ Unif{-1, 1}
//   eta = exp{k * (h1' gamma0 + a1 * h1' gamma1)}  (k = C/2 gaussian,
//         k = 1/2 for the skew variant, where C moves the skew instead)
//   X2 = B_{a1} X1 + eta * xi
//   Y = h2' beta20 + a2 * h2' beta21 + eps,  eps ~ Norm(0, 1)
// Gaussian variant: xi ~ Norm(0_2, I_2). Skew variant: xi components are
// standardized chi-squared, (chisq_df - df)/sqrt(2 df) with df = 10C + 1;
// smaller C means heavier skew.
struct GenerativeConfig {
  GenVariant variant = GenVariant::Gaussian;
  double C = 0.0;
  double rho = 0.5;
  Eigen::Vector3d gamma0{1.0, 0.5, 0.0};
  Eigen::Vector3d gamma1{-1.0, -0.5, 0.0};
  Eigen::Vector3d beta20{0.25, -1.0, 0.5};
  Eigen::Vector3d beta21{1.0, -0.5, -0.25};
  Eigen::Matrix2d B_plus{{-0.1, -0.1}, {0.1, 0.1}};
  Eigen::Matrix2d B_minus{{0.5, -0.1}, {-0.1, 0.5}};
  std::uint64_t seed = 1;

  static GenerativeConfig defaults(GenVariant variant, double C = 0.0);
  void check() const;

  double eta(const Eigen::VectorXd& x1, int a1) const;
  // One draw of xi's scalar component.
  double draw_xi(Rng& rng) const;
  double true_m(const Eigen::Vector2d& x2) const;
  double true_c(const Eigen::Vector2d& x2) const;
};

// n trajectories with randomized treatments; deterministic given the seed
// and independent of evaluation order.
Dataset generate(const GenerativeConfig& config, int n, std::uint64_t seed);

// One trajectory; treatments drawn uniformly unless forced. The draws
// consumed never depend on the forcing, so forced-arm runs sharing a
// stream are common-random-number coupled.
Trajectory simulate_one(const GenerativeConfig& config, Rng& rng,
                        std::optional<int> force_a1 = {},
                        std::optional<int> force_a2 = {});

// Fraction of test patients consistent with the regime whose outcome
// exceeds lambda, over N freshly generated trajectories. Throws
// NumericalError when the consistent subgroup is empty.
double evaluate_regime_prob(const GenerativeConfig& config, const Regime& regime,
                            double lambda, int N, std::uint64_t seed);

// Empirical tau-quantile (inf{y : ecdf >= tau}) of the outcome over the
// consistent subgroup.
double evaluate_regime_quantile(const GenerativeConfig& config,
                                const Regime& regime, double tau, int N,
                                std::uint64_t seed);

// inf{y : ecdf(y) >= tau} of a sample.
double empirical_quantile(std::vector<double> values, double tau);

enum class EstimatorKind { Tiq, Qiq, QLearn, IqLearn, BinaryQ };
std::string estimator_name(EstimatorKind k);
std::optional<EstimatorKind> estimator_from_name(const std::string& name);

struct ExperimentConfig {
  GenVariant variant = GenVariant::Gaussian;
  std::vector<double> C_values{0.0, 0.5, 1.0};
  std::vector<double> lambdas;  // exceedance-probability experiments
  std::vector<double> taus;     // quantile experiments (exclusive)
  int J = 100;
  int n = 250;
  int N = 10000;
  std::uint64_t seed = 1;
  std::vector<EstimatorKind> estimators{EstimatorKind::Tiq, EstimatorKind::QLearn,
                                        EstimatorKind::BinaryQ,
                                        EstimatorKind::IqLearn};
  CdfKind cdf = CdfKind::NormalScale;
  JointKind joint = JointKind::GaussianCopula;
  int mc_draws = 10000;
  QiqOptions qiq;
};

struct ExperimentRow {
  int rep = 0;
  double C = 0.0;
  EstimatorKind estimator = EstimatorKind::Tiq;
  double level = 0.0;  // lambda or tau
  double value = 0.0;  // exceedance probability or quantile
  int n_consistent = 0;
};

struct ExperimentFailure {
  int rep = 0;
  double C = 0.0;
  EstimatorKind estimator = EstimatorKind::Tiq;
  double level = 0.0;
  std::string what;
};

struct ExperimentSummaryRow {
  double C = 0.0;
  EstimatorKind estimator = EstimatorKind::Tiq;
  double level = 0.0;
  double mean = 0.0;
  double se = 0.0;  // Monte Carlo SE of the mean over replications
  int reps = 0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  std::vector<ExperimentFailure> failures;
  std::vector<ExperimentSummaryRow> summary() const;
};

// Per replication: fresh training data, one fit per estimator, fresh test
// data, consistent-subgroup evaluation at every level. Failures of a
// single fit are recorded and excluded rather than aborting the run.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace iqlearn
