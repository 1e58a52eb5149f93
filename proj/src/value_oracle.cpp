#include "iqlearn/value_oracle.hpp"

#include <algorithm>
#include <cmath>

#include "iqlearn/math.hpp"
#include "iqlearn/parallel.hpp"

namespace iqlearn {

ValueEstimate ipw_value(const Dataset& data, const Regime& regime,
                        double lambda) {
  const int n = data.n();
  std::vector<unsigned char> keep(static_cast<size_t>(n), 0);
  parallel_for(static_cast<size_t>(n), [&](size_t i) {
    const auto& r = data.row(static_cast<int>(i));
    if (regime.pi1(r.x1) != r.a1) return;
    if (regime.pi2(r.x1, r.a1, r.x2) != r.a2) return;
    keep[i] = 1;
  });
  int consistent = 0, hits = 0;
  for (int i = 0; i < n; ++i) {
    if (!keep[static_cast<size_t>(i)]) continue;
    ++consistent;
    if (data.row(i).y > lambda) ++hits;
  }
  if (consistent == 0)
    throw NumericalError("ipw_value: empty consistent subgroup");
  ValueEstimate est;
  est.n_consistent = consistent;
  est.value = static_cast<double>(hits) / static_cast<double>(consistent);
  est.se = std::sqrt(est.value * (1.0 - est.value) /
                     static_cast<double>(consistent));
  return est;
}

ValueEstimate ipw_value_rows(const Dataset& data, std::span<const int> pi1,
                             std::span<const int> pi2, double lambda) {
  const auto n = static_cast<size_t>(data.n());
  if (pi1.size() != n || pi2.size() != n)
    throw DataError("ipw_value_rows: decision length mismatch");
  int consistent = 0, hits = 0;
  for (size_t i = 0; i < n; ++i) {
    const auto& r = data.row(static_cast<int>(i));
    if (r.a1 != pi1[i] || r.a2 != pi2[i]) continue;
    ++consistent;
    if (r.y > lambda) ++hits;
  }
  if (consistent == 0)
    throw NumericalError("ipw_value: empty consistent subgroup");
  ValueEstimate est;
  est.n_consistent = consistent;
  est.value = static_cast<double>(hits) / static_cast<double>(consistent);
  est.se = std::sqrt(est.value * (1.0 - est.value) /
                     static_cast<double>(consistent));
  return est;
}

namespace {

// Forced-arm outcome draws: treatments follow the regime. The random
// draws consumed do not depend on the recommended arms, so runs sharing a
// seed are coupled across regimes and thresholds.
std::vector<double> forced_outcomes(const GenerativeConfig& config,
                                    const Regime& regime, int nbig,
                                    std::uint64_t seed) {
  if (nbig < 1) throw DataError("oracle: nbig must be >= 1");
  config.check();
  const double l22 = std::sqrt(1.0 - config.rho * config.rho);
  std::vector<double> ys(static_cast<size_t>(nbig));
  parallel_for(static_cast<size_t>(nbig), [&](size_t i) {
    Rng rng(substream(seed, i));
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const Eigen::VectorXd x1 =
        Eigen::Vector2d(1.0 + z1, 1.0 + config.rho * z1 + l22 * z2);
    const int a1 = regime.pi1(x1);
    const Eigen::Vector2d xi(config.draw_xi(rng), config.draw_xi(rng));
    const Eigen::Matrix2d& B = a1 == 1 ? config.B_plus : config.B_minus;
    const Eigen::Vector2d x2 =
        B * Eigen::Vector2d(x1(0), x1(1)) + config.eta(x1, a1) * xi;
    const int a2 = regime.pi2(x1, a1, x2);
    ys[i] = config.true_m(x2) + static_cast<double>(a2) * config.true_c(x2) +
            rng.normal();
  });
  return ys;
}

}  // namespace

OracleResult oracle_true_prob(const GenerativeConfig& config,
                              const Regime& regime, double lambda, int nbig,
                              std::uint64_t seed) {
  const std::vector<double> ys = forced_outcomes(config, regime, nbig, seed);
  std::size_t hits = 0;
  for (double y : ys) hits += y > lambda ? 1 : 0;
  OracleResult res;
  res.n = nbig;
  res.value = static_cast<double>(hits) / static_cast<double>(nbig);
  res.se = std::sqrt(res.value * (1.0 - res.value) / static_cast<double>(nbig));
  return res;
}

OracleResult oracle_true_quantile(const GenerativeConfig& config,
                                  const Regime& regime, double tau, int nbig,
                                  std::uint64_t seed) {
  std::vector<double> ys = forced_outcomes(config, regime, nbig, seed);
  OracleResult res;
  res.n = nbig;
  res.value = empirical_quantile(std::move(ys), tau);
  res.se = 0.0;
  return res;
}

namespace {

// Conditional draws of w = m + |c| under the true optimal second-stage
// rule, given (x1, a1); the (xi, eps) draws are shared across arms.
struct ConditionalDraws {
  std::vector<double> w_minus, w_plus;  // m + |c| per draw
  std::vector<double> eps;              // shared second-stage error
};

ConditionalDraws conditional_draws(const GenerativeConfig& config,
                                   const Eigen::VectorXd& x1, int n_inner,
                                   std::uint64_t stream) {
  ConditionalDraws d;
  d.w_minus.resize(static_cast<size_t>(n_inner));
  d.w_plus.resize(static_cast<size_t>(n_inner));
  d.eps.resize(static_cast<size_t>(n_inner));
  const Eigen::Vector2d x1v(x1(0), x1(1));
  const double eta_minus = config.eta(x1, -1);
  const double eta_plus = config.eta(x1, +1);
  const Eigen::Vector2d b_minus = config.B_minus * x1v;
  const Eigen::Vector2d b_plus = config.B_plus * x1v;
  Rng rng(stream);
  for (int k = 0; k < n_inner; ++k) {
    const Eigen::Vector2d xi(config.draw_xi(rng), config.draw_xi(rng));
    const Eigen::Vector2d x2m = b_minus + eta_minus * xi;
    const Eigen::Vector2d x2p = b_plus + eta_plus * xi;
    d.w_minus[static_cast<size_t>(k)] =
        config.true_m(x2m) + std::fabs(config.true_c(x2m));
    d.w_plus[static_cast<size_t>(k)] =
        config.true_m(x2p) + std::fabs(config.true_c(x2p));
    d.eps[static_cast<size_t>(k)] = rng.normal();
  }
  return d;
}

OracleAction action_from_draws(const ConditionalDraws& d, double lambda) {
  const auto n = static_cast<double>(d.eps.size());
  double pm = 0.0, pp = 0.0, gap2 = 0.0;
  for (size_t k = 0; k < d.eps.size(); ++k) {
    const double hm = (d.w_minus[k] + d.eps[k] > lambda) ? 1.0 : 0.0;
    const double hp = (d.w_plus[k] + d.eps[k] > lambda) ? 1.0 : 0.0;
    pm += hm;
    pp += hp;
    const double diff = hp - hm;
    gap2 += diff * diff;
  }
  pm /= n;
  pp /= n;
  OracleAction a;
  a.p_minus = pm;
  a.p_plus = pp;
  const double gap_mean = pp - pm;
  a.gap_se = std::sqrt(std::max(0.0, gap2 / n - gap_mean * gap_mean) / n);
  a.action = sgn(gap_mean);
  a.near_tie = std::fabs(gap_mean) <= 3.0 * a.gap_se;
  return a;
}

// I_true(y | x1, a1) = E[Phi(y - w)]: the epsilon integral is exact.
double i_true_from_w(const std::vector<double>& w, double y) {
  double acc = 0.0;
  for (double wk : w) acc += norm_cdf(y - wk);
  return acc / static_cast<double>(w.size());
}

double pooled_min_cdf(const std::vector<ConditionalDraws>& draws, double y) {
  double acc = 0.0;
  for (const auto& d : draws)
    acc += std::min(i_true_from_w(d.w_minus, y), i_true_from_w(d.w_plus, y));
  return acc / static_cast<double>(draws.size());
}

double bisect_quantile(const std::function<double(double)>& cdf, double tau,
                       double lo, double hi, double tol) {
  double width = hi - lo;
  int guard = 0;
  while (cdf(hi) < tau) {
    hi += width;
    width *= 2.0;
    if (++guard > 200) throw NumericalError("oracle: quantile bracket failed");
  }
  width = hi - lo;
  while (cdf(lo) >= tau) {
    lo -= width;
    width *= 2.0;
    if (++guard > 200) throw NumericalError("oracle: quantile bracket failed");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) >= tau)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

OracleAction quantile_action_from_draws(const ConditionalDraws& d,
                                        double y_star) {
  // exceedance at the optimal quantile decides the arm; epsilon smoothed
  const auto n = static_cast<double>(d.w_minus.size());
  double pm = 0.0, pp = 0.0, gap2 = 0.0;
  for (size_t k = 0; k < d.w_minus.size(); ++k) {
    const double hm = 1.0 - norm_cdf(y_star - d.w_minus[k]);
    const double hp = 1.0 - norm_cdf(y_star - d.w_plus[k]);
    pm += hm;
    pp += hp;
    const double diff = hp - hm;
    gap2 += diff * diff;
  }
  pm /= n;
  pp /= n;
  OracleAction a;
  a.p_minus = pm;
  a.p_plus = pp;
  const double gap_mean = pp - pm;
  a.gap_se = std::sqrt(std::max(0.0, gap2 / n - gap_mean * gap_mean) / n);
  a.action = sgn(gap_mean);
  a.near_tie = std::fabs(gap_mean) <= 3.0 * a.gap_se;
  return a;
}

}  // namespace

std::vector<OracleAction> oracle_optimal_rule(
    const GenerativeConfig& config, const OracleTarget& target,
    std::span<const Eigen::VectorXd> histories, int nbig, std::uint64_t seed) {
  if (nbig < 100000)
    throw DataError("oracle_optimal_rule: nbig per arm must be >= 1e5");
  config.check();
  std::vector<ConditionalDraws> draws(histories.size());
  parallel_for(histories.size(), [&](size_t i) {
    draws[i] = conditional_draws(config, histories[i], nbig,
                                 mc_stream(seed, histories[i]));
  });
  std::vector<OracleAction> actions(histories.size());
  if (target.kind == OracleTarget::Kind::Threshold) {
    parallel_for(histories.size(), [&](size_t i) {
      actions[i] = action_from_draws(draws[i], target.value);
    });
  } else {
    double w_lo = 1e300, w_hi = -1e300;
    for (const auto& d : draws)
      for (const auto* v : {&d.w_minus, &d.w_plus})
        for (double w : *v) {
          w_lo = std::min(w_lo, w);
          w_hi = std::max(w_hi, w);
        }
    const double y_star = bisect_quantile(
        [&](double y) { return pooled_min_cdf(draws, y); }, target.value,
        w_lo - 6.0, w_hi + 6.0, 1e-4);
    parallel_for(histories.size(), [&](size_t i) {
      actions[i] = quantile_action_from_draws(draws[i], y_star);
    });
  }
  return actions;
}

OracleOptimum oracle_optimal_prob(const GenerativeConfig& config, double lambda,
                                  int n_histories, int n_inner,
                                  std::uint64_t seed) {
  config.check();
  std::vector<double> best(static_cast<size_t>(n_histories));
  parallel_for(static_cast<size_t>(n_histories), [&](size_t i) {
    Rng rng(substream(seed, i));
    const Trajectory t = simulate_one(config, rng);
    const ConditionalDraws d =
        conditional_draws(config, t.x1, n_inner, substream(seed, i ^ 0x5bd1e995u));
    // epsilon integrated exactly: pr(Y > lambda) = E[1 - Phi(lambda - w)]
    best[i] = 1.0 - std::min(i_true_from_w(d.w_minus, lambda),
                             i_true_from_w(d.w_plus, lambda));
  });
  OracleOptimum opt;
  double mean = 0.0, sq = 0.0;
  for (double b : best) {
    mean += b;
    sq += b * b;
  }
  const auto n = static_cast<double>(n_histories);
  mean /= n;
  opt.value = mean;
  // outer variation dominates; inner MC error is second order
  opt.se = std::sqrt(std::max(0.0, sq / n - mean * mean) / n);
  return opt;
}

OracleOptimum oracle_optimal_quantile(const GenerativeConfig& config, double tau,
                                      int n_histories, int n_inner,
                                      std::uint64_t seed) {
  config.check();
  std::vector<ConditionalDraws> draws(static_cast<size_t>(n_histories));
  parallel_for(static_cast<size_t>(n_histories), [&](size_t i) {
    Rng rng(substream(seed, i));
    const Trajectory t = simulate_one(config, rng);
    draws[i] = conditional_draws(config, t.x1, n_inner,
                                 substream(seed, i ^ 0x5bd1e995u));
  });
  double w_lo = 1e300, w_hi = -1e300;
  for (const auto& d : draws)
    for (const auto* v : {&d.w_minus, &d.w_plus})
      for (double w : *v) {
        w_lo = std::min(w_lo, w);
        w_hi = std::max(w_hi, w);
      }
  OracleOptimum opt;
  opt.value = bisect_quantile(
      [&](double y) { return pooled_min_cdf(draws, y); }, tau, w_lo - 6.0,
      w_hi + 6.0, 1e-4);
  opt.se = 0.0;
  return opt;
}

}  // namespace iqlearn
