#pragma once

#include <span>

#include "iqlearn/simgen.hpp"

namespace iqlearn {

// Inverse-probability-weighted value of a regime on observed data: the
// ratio of indicator sums over trajectories whose observed treatments
// match the regime (randomization probabilities 1/2 cancel).
struct ValueEstimate {
  double value = 0.0;
  int n_consistent = 0;
  double se = 0.0;  // binomial approximation on the consistent subgroup
};

ValueEstimate ipw_value(const Dataset& data, const Regime& regime,
                        double lambda);

// Same ratio with recommendations supplied per row (e.g. from a decisions
// CSV produced by the fit commands).
ValueEstimate ipw_value_rows(const Dataset& data, std::span<const int> pi1,
                             std::span<const int> pi2, double lambda);

// Brute-force quantities under a known generative model, by forced-arm
// simulation (treatments set to the regime's recommendations rather than
// randomized and subset).
struct OracleResult {
  double value = 0.0;  // exceedance probability or quantile
  double se = 0.0;     // 0 for quantiles
  int n = 0;
};

OracleResult oracle_true_prob(const GenerativeConfig& config,
                              const Regime& regime, double lambda, int nbig,
                              std::uint64_t seed);
OracleResult oracle_true_quantile(const GenerativeConfig& config,
                                  const Regime& regime, double tau, int nbig,
                                  std::uint64_t seed);

// Per-history optimal first-stage action: conditional forward simulation
// of (X2, eps) for each arm with shared draws, second stage fixed at the
// true optimal rule sgn(true c). near_tie flags gaps under 3 joint SE.
struct OracleAction {
  int action = 1;
  double p_minus = 0.0;  // criterion value under a1 = -1
  double p_plus = 0.0;   // criterion value under a1 = +1
  double gap_se = 0.0;   // SE of (p_plus - p_minus), paired draws
  bool near_tie = false;
};

struct OracleTarget {
  enum class Kind { Threshold, Quantile } kind = Kind::Threshold;
  double value = 0.0;  // lambda or tau
  static OracleTarget threshold(double lambda) {
    return {Kind::Threshold, lambda};
  }
  static OracleTarget quantile(double tau) { return {Kind::Quantile, tau}; }
};

// For a quantile target the actions are evaluated at the true optimal
// quantile y*_tau, located by bisection of the pooled minimum-arm CDF over
// the supplied histories (the population stand-in).
std::vector<OracleAction> oracle_optimal_rule(
    const GenerativeConfig& config, const OracleTarget& target,
    std::span<const Eigen::VectorXd> histories, int nbig, std::uint64_t seed);

// Population-level optima for acceptance baselines: E over fresh baseline
// histories of the best-arm conditional exceedance probability, and the
// optimal tau-quantile inf{y : E[min_arm I_true(y)] >= tau}.
struct OracleOptimum {
  double value = 0.0;
  double se = 0.0;  // 0 for quantiles
};
OracleOptimum oracle_optimal_prob(const GenerativeConfig& config, double lambda,
                                  int n_histories, int n_inner,
                                  std::uint64_t seed);
OracleOptimum oracle_optimal_quantile(const GenerativeConfig& config, double tau,
                                      int n_histories, int n_inner,
                                      std::uint64_t seed);

}  // namespace iqlearn
