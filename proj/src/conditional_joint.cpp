#include "iqlearn/conditional_joint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iqlearn/linreg.hpp"
#include "iqlearn/math.hpp"
#include "iqlearn/rng.hpp"

namespace iqlearn {

Eigen::VectorXd fit_mean_model(const Eigen::VectorXd& targets,
                               const Eigen::MatrixXd& design) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < design.cols(); ++j)
    names.push_back("mean:z" + std::to_string(j));
  return solve_least_squares(design, targets, names);
}

Eigen::VectorXd fit_var_model(const Eigen::VectorXd& sq_residuals,
                              const Eigen::MatrixXd& design,
                              const VarFitOptions& opts) {
  const Eigen::Index n = sq_residuals.size(), p = design.cols();
  if (design.rows() != n)
    throw DataError("fit_var_model: design/target length mismatch");
  if (sq_residuals.minCoeff() < 0.0)
    throw DataError("fit_var_model: squared residuals must be nonnegative");
  const double mean_sq = sq_residuals.mean();
  if (!(mean_sq > 0.0))
    throw NumericalError("fit_var_model: all squared residuals are zero");

  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(p);
  gamma(0) = std::log(mean_sq);

  auto objective = [&](const Eigen::VectorXd& g, Eigen::ArrayXd& fitted) {
    fitted = (design * g).array().min(500.0).exp();
    return (sq_residuals.array() - fitted).matrix().squaredNorm();
  };
  // gradient scale ~ n * s^2 * s; make the tolerance dimensionless
  const double grad_scale =
      static_cast<double>(n) * mean_sq * mean_sq + 1e-300;

  Eigen::ArrayXd fitted;
  double obj = objective(gamma, fitted);
  for (int it = 0; it < opts.max_iter; ++it) {
    const Eigen::ArrayXd resid = sq_residuals.array() - fitted;
    const Eigen::VectorXd grad =
        -2.0 * design.transpose() * (resid * fitted).matrix();
    if (grad.norm() / grad_scale < opts.grad_tol) return gamma;

    // Gauss-Newton step for residual r_i = s_i - exp(z_i' gamma)
    const Eigen::MatrixXd jtj =
        design.transpose() * (fitted * fitted).matrix().asDiagonal() * design;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(jtj);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("fit_var_model: singular Gauss-Newton system");
    const Eigen::VectorXd step =
        ldlt.solve(design.transpose() * (resid * fitted).matrix());

    double scale = 1.0;
    Eigen::VectorXd cand = gamma + step;
    Eigen::ArrayXd cand_fitted;
    double cand_obj = objective(cand, cand_fitted);
    int halvings = 0;
    while (cand_obj > obj && halvings < 40) {
      scale *= 0.5;
      cand = gamma + scale * step;
      cand_obj = objective(cand, cand_fitted);
      ++halvings;
    }
    const double decrease = obj - cand_obj;
    gamma = cand;
    obj = cand_obj;
    fitted = cand_fitted;
    if (decrease <= 1e-14 * (obj + 1e-300) && scale * step.norm() < 1e-10)
      return gamma;  // stalled at a stationary point
  }
  const Eigen::ArrayXd resid = sq_residuals.array() - fitted;
  const double grad_norm =
      (-2.0 * design.transpose() * (resid * fitted).matrix()).norm();
  if (grad_norm / grad_scale < 1e-6) return gamma;
  throw NumericalError("fit_var_model: no convergence after " +
                       std::to_string(opts.max_iter) +
                       " iterations (gradient norm " +
                       std::to_string(grad_norm) + ")");
}

Eigen::VectorXd standardized_residuals(const Eigen::VectorXd& targets,
                                       const Eigen::VectorXd& mu,
                                       const Eigen::VectorXd& sigma) {
  if (targets.size() != mu.size() || targets.size() != sigma.size())
    throw DataError("standardized_residuals: length mismatch");
  if (sigma.minCoeff() <= 0.0)
    throw NumericalError("standardized_residuals: nonpositive scale");
  return ((targets - mu).array() / sigma.array()).matrix();
}

double MeanVarModel::mu(const Eigen::VectorXd& x1, int a1) const {
  const Eigen::VectorXd h0 = spec.main.build(x1);
  const Eigen::VectorXd h1 = spec.interaction.build(x1);
  const Eigen::Index k0 = h0.size();
  return h0.dot(theta.head(k0)) +
         static_cast<double>(a1) * h1.dot(theta.tail(h1.size()));
}

double MeanVarModel::sigma2(const Eigen::VectorXd& x1, int a1) const {
  const Eigen::VectorXd h0 = spec.main.build(x1);
  const Eigen::VectorXd h1 = spec.interaction.build(x1);
  Eigen::VectorXd z(h0.size() + h1.size());
  z.head(h0.size()) = h0;
  z.tail(h1.size()) = static_cast<double>(a1) * h1;
  return std::exp(std::min(z.dot(gamma), 500.0));
}

double MeanVarModel::sigma(const Eigen::VectorXd& x1, int a1) const {
  return std::sqrt(sigma2(x1, a1));
}

namespace {

Eigen::MatrixXd stage1_design(const Dataset& data, const Stage1Spec& spec) {
  const int n = data.n();
  const int k0 = spec.main.dim();
  const int k1 = spec.interaction.dim();
  Eigen::MatrixXd design(n, k0 + k1);
  for (int i = 0; i < n; ++i) {
    const auto& r = data.row(i);
    design.row(i).head(k0) = spec.main.build(r.x1);
    design.row(i).tail(k1) = static_cast<double>(r.a1) * spec.interaction.build(r.x1);
  }
  return design;
}

MeanVarModel fit_mean_var(const Eigen::VectorXd& targets,
                          const Eigen::MatrixXd& design,
                          const Stage1Spec& spec,
                          const VarFitOptions& var_opts) {
  MeanVarModel model;
  model.spec = spec;
  model.theta = fit_mean_model(targets, design);
  const Eigen::VectorXd mean_resid = targets - design * model.theta;
  model.gamma = fit_var_model(mean_resid.array().square(), design, var_opts);
  return model;
}

double sample_sd(const Eigen::VectorXd& v) {
  const double n = static_cast<double>(v.size());
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / (n - 1.0));
}

// inf{x : ecdf(x) >= u} over stored order statistics.
double inv_ecdf(const std::vector<double>& sorted, double u) {
  const auto n = static_cast<double>(sorted.size());
  auto k = static_cast<std::ptrdiff_t>(std::ceil(u * n));
  if (k < 1) k = 1;
  if (k > static_cast<std::ptrdiff_t>(sorted.size()))
    k = static_cast<std::ptrdiff_t>(sorted.size());
  return sorted[static_cast<size_t>(k - 1)];
}

struct ResidualPair {
  double em, ec;
};

// One pair of standardized-residual draws from the dependence model.
// Consumes a fixed pattern of uniforms per call for reproducibility.
ResidualPair draw_residual_pair(const ConditionalJoint& cj, Rng& rng) {
  if (cj.kind == JointKind::GaussianCopula) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double r = cj.copula_r;
    const double z2c = r * z1 + std::sqrt(1.0 - r * r) * z2;
    return {inv_ecdf(cj.sorted_em, norm_cdf(z1)),
            inv_ecdf(cj.sorted_ec, norm_cdf(z2c))};
  }
  const size_t j = rng.index(cj.kde_em.size());
  const double z1 = rng.normal();
  const double z2 = rng.normal();
  return {cj.kde_em[j] + cj.bandwidth_m * z1,
          cj.kde_ec[j] + cj.bandwidth_c * z2};
}

}  // namespace

ConditionalJoint fit_conditional_joint(const Dataset& data,
                                       const FittedStage2& stage2,
                                       const Stage1Spec& spec, JointKind kind,
                                       const VarFitOptions& var_opts) {
  if (stage2.data_hash != data.hash())
    throw DataError("conditional joint: stage-2 fit is from a different dataset");
  const int n = data.n();
  Eigen::VectorXd m_targets(n), c_targets(n);
  for (int i = 0; i < n; ++i) {
    const auto& r = data.row(i);
    m_targets(i) = m_hat(stage2, r.x1, r.a1, r.x2);
    c_targets(i) = c_hat(stage2, r.x1, r.a1, r.x2);
  }
  const Eigen::MatrixXd design = stage1_design(data, spec);

  ConditionalJoint cj;
  cj.kind = kind;
  cj.data_hash = data.hash();
  cj.m_model = fit_mean_var(m_targets, design, spec, var_opts);
  cj.c_model = fit_mean_var(c_targets, design, spec, var_opts);

  Eigen::VectorXd mu_m(n), sd_m(n), mu_c(n), sd_c(n);
  for (int i = 0; i < n; ++i) {
    const auto& r = data.row(i);
    mu_m(i) = cj.m_model.mu(r.x1, r.a1);
    sd_m(i) = cj.m_model.sigma(r.x1, r.a1);
    mu_c(i) = cj.c_model.mu(r.x1, r.a1);
    sd_c(i) = cj.c_model.sigma(r.x1, r.a1);
  }
  const Eigen::VectorXd e_m = standardized_residuals(m_targets, mu_m, sd_m);
  const Eigen::VectorXd e_c = standardized_residuals(c_targets, mu_c, sd_c);
  if (kind == JointKind::GaussianCopula)
    fit_copula(e_m, e_c, cj);
  else
    fit_kde(e_m, e_c, cj);
  return cj;
}

void fit_copula(const Eigen::VectorXd& e_m, const Eigen::VectorXd& e_c,
                ConditionalJoint& cj) {
  const Eigen::Index n = e_m.size();
  if (n < 10 || e_c.size() != n)
    throw DataError("fit_copula: need matched residual vectors with n >= 10");
  auto normal_scores = [n](const Eigen::VectorXd& e) {
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&e](int a, int b) { return e(a) < e(b); });
    Eigen::VectorXd scores(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double u = static_cast<double>(k + 1) / static_cast<double>(n + 1);
      scores(order[static_cast<size_t>(k)]) = norm_quantile(u);
    }
    return scores;
  };
  if (sample_sd(e_m) <= 0.0 || sample_sd(e_c) <= 0.0)
    throw NumericalError("fit_copula: degenerate residual vector");
  cj.kind = JointKind::GaussianCopula;
  const Eigen::VectorXd zm = normal_scores(e_m);
  const Eigen::VectorXd zc = normal_scores(e_c);
  const double cm = (zm.array() - zm.mean()).matrix().dot(
      (zc.array() - zc.mean()).matrix());
  const double denom = std::sqrt((zm.array() - zm.mean()).square().sum() *
                                 (zc.array() - zc.mean()).square().sum());
  double r = cm / denom;
  // keep strictly inside (-1, 1) so the conditional draw stays proper
  const double r_max = 1.0 - 1e-10;
  r = std::clamp(r, -r_max, r_max);
  cj.copula_r = r;
  cj.sorted_em = std::vector<double>(e_m.data(), e_m.data() + n);
  cj.sorted_ec = std::vector<double>(e_c.data(), e_c.data() + n);
  std::sort(cj.sorted_em.begin(), cj.sorted_em.end());
  std::sort(cj.sorted_ec.begin(), cj.sorted_ec.end());
}

void fit_kde(const Eigen::VectorXd& e_m, const Eigen::VectorXd& e_c,
             ConditionalJoint& cj) {
  const Eigen::Index n = e_m.size();
  if (n < 10 || e_c.size() != n)
    throw DataError("fit_kde: need matched residual vectors with n >= 10");
  const double sd_m = sample_sd(e_m);
  const double sd_c = sample_sd(e_c);
  if (sd_m <= 0.0 || sd_c <= 0.0)
    throw NumericalError("fit_kde: degenerate residual vector");
  cj.kind = JointKind::BivariateKde;
  const double nf = std::pow(static_cast<double>(n), -1.0 / 6.0);
  cj.bandwidth_m = 1.06 * sd_m * nf;
  cj.bandwidth_c = 1.06 * sd_c * nf;
  cj.kde_em = std::vector<double>(e_m.data(), e_m.data() + n);
  cj.kde_ec = std::vector<double>(e_c.data(), e_c.data() + n);
}

JointSample ConditionalJoint::sample(const Eigen::VectorXd& x1, int a1,
                                     int draws, std::uint64_t seed) const {
  if (draws < 1) throw DataError("sample_joint: draws must be >= 1");
  const double mu_u = m_model.mu(x1, a1), sd_u = m_model.sigma(x1, a1);
  const double mu_v = c_model.mu(x1, a1), sd_v = c_model.sigma(x1, a1);
  JointSample s;
  s.u.resize(static_cast<size_t>(draws));
  s.v.resize(static_cast<size_t>(draws));
  Rng rng(seed);
  for (int k = 0; k < draws; ++k) {
    const ResidualPair e = draw_residual_pair(*this, rng);
    s.u[static_cast<size_t>(k)] = mu_u + sd_u * e.em;
    s.v[static_cast<size_t>(k)] = mu_v + sd_v * e.ec;
  }
  return s;
}

ConditionalJoint::ArmW ConditionalJoint::sample_w_arms(
    const Eigen::VectorXd& x1, int draws, std::uint64_t seed) const {
  if (draws < 1) throw DataError("sample_w_arms: draws must be >= 1");
  const double mu_u_m = m_model.mu(x1, -1), sd_u_m = m_model.sigma(x1, -1);
  const double mu_v_m = c_model.mu(x1, -1), sd_v_m = c_model.sigma(x1, -1);
  const double mu_u_p = m_model.mu(x1, +1), sd_u_p = m_model.sigma(x1, +1);
  const double mu_v_p = c_model.mu(x1, +1), sd_v_p = c_model.sigma(x1, +1);
  ArmW w;
  w.minus.resize(static_cast<size_t>(draws));
  w.plus.resize(static_cast<size_t>(draws));
  Rng rng(seed);
  for (int k = 0; k < draws; ++k) {
    const ResidualPair e = draw_residual_pair(*this, rng);
    w.minus[static_cast<size_t>(k)] =
        mu_u_m + sd_u_m * e.em + std::fabs(mu_v_m + sd_v_m * e.ec);
    w.plus[static_cast<size_t>(k)] =
        mu_u_p + sd_u_p * e.em + std::fabs(mu_v_p + sd_v_p * e.ec);
  }
  return w;
}

double i_integral(double y, const ResidualCdf& F, const JointSample& sample) {
  if (sample.u.empty() || sample.u.size() != sample.v.size())
    throw DataError("i_integral: empty or mismatched sample");
  double acc = 0.0;
  for (size_t k = 0; k < sample.u.size(); ++k)
    acc += F(y - sample.u[k] - std::fabs(sample.v[k]));
  return acc / static_cast<double>(sample.u.size());
}

std::pair<double, double> i_integral_se(double y, const ResidualCdf& F,
                                        const JointSample& sample) {
  if (sample.u.empty() || sample.u.size() != sample.v.size())
    throw DataError("i_integral: empty or mismatched sample");
  const auto m = static_cast<double>(sample.u.size());
  double acc = 0.0, acc2 = 0.0;
  for (size_t k = 0; k < sample.u.size(); ++k) {
    const double t = F(y - sample.u[k] - std::fabs(sample.v[k]));
    acc += t;
    acc2 += t * t;
  }
  const double mean = acc / m;
  const double var = std::max(0.0, acc2 / m - mean * mean);
  return {mean, std::sqrt(var / m)};
}

std::uint64_t mc_stream(std::uint64_t seed, const Eigen::VectorXd& x1) {
  const std::uint64_t h =
      fnv1a(x1.data(), sizeof(double) * static_cast<size_t>(x1.size()));
  return mix64(seed ^ h);
}

namespace detail {

double i_from_w(const std::vector<double>& w, const ResidualCdf& F, double y) {
  double acc = 0.0;
  for (double wk : w) acc += F(y - wk);
  return acc / static_cast<double>(w.size());
}

double i_from_w_fn(const std::vector<double>& w,
                   const std::function<double(double)>& F, double y) {
  double acc = 0.0;
  for (double wk : w) acc += F(y - wk);
  return acc / static_cast<double>(w.size());
}

}  // namespace detail

}  // namespace iqlearn
