#include "iqlearn/core.hpp"

#include <cmath>

#include "iqlearn/math.hpp"

namespace iqlearn {

int sgn(double x) {
  if (!std::isfinite(x)) throw NumericalError("sgn: non-finite argument");
  return x >= 0.0 ? 1 : -1;
}

namespace {

bool valid_treatment(int a) { return a == -1 || a == 1; }

bool all_finite(const Eigen::VectorXd& v) {
  return v.allFinite();
}

std::uint64_t hash_dataset(const std::vector<Trajectory>& rows) {
  std::uint64_t h = fnv1a(nullptr, 0);
  auto add = [&h](const void* p, size_t len) { h = fnv1a(p, len, h); };
  const std::uint64_t n = rows.size();
  add(&n, sizeof n);
  for (const auto& r : rows) {
    add(r.x1.data(), sizeof(double) * static_cast<size_t>(r.x1.size()));
    add(&r.a1, sizeof r.a1);
    add(r.x2.data(), sizeof(double) * static_cast<size_t>(r.x2.size()));
    add(&r.a2, sizeof r.a2);
    add(&r.y, sizeof r.y);
  }
  return h;
}

}  // namespace

Dataset Dataset::validate(std::vector<Trajectory> rows) {
  if (rows.empty()) throw DataError("dataset is empty");
  const int p1 = static_cast<int>(rows.front().x1.size());
  const int p2 = static_cast<int>(rows.front().x2.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string at = " at row " + std::to_string(i);
    if (static_cast<int>(r.x1.size()) != p1 ||
        static_cast<int>(r.x2.size()) != p2)
      throw DataError("covariate dimension mismatch" + at);
    if (!valid_treatment(r.a1) || !valid_treatment(r.a2))
      throw DataError("invalid treatment code" + at);
    if (!all_finite(r.x1) || !all_finite(r.x2) || !std::isfinite(r.y))
      throw DataError("non-finite value" + at);
  }
  const std::uint64_t h = hash_dataset(rows);
  return Dataset(std::move(rows), p1, p2, h);
}

void Dataset::require_both_arms() const {
  bool a1p = false, a1m = false, a2p = false, a2m = false;
  for (const auto& r : rows_) {
    (r.a1 == 1 ? a1p : a1m) = true;
    (r.a2 == 1 ? a2p : a2m) = true;
  }
  if (!(a1p && a1m))
    throw DataError("both first-stage treatment arms must be present");
  if (!(a2p && a2m))
    throw DataError("both second-stage treatment arms must be present");
}

History1 make_history1(const Eigen::VectorXd& x1) {
  History1 h(x1.size() + 1);
  h(0) = 1.0;
  h.tail(x1.size()) = x1;
  return h;
}

FeatureMap FeatureMap::history1(int p1) {
  FeatureMap m;
  m.x1_cols.resize(static_cast<size_t>(p1));
  for (int j = 0; j < p1; ++j) m.x1_cols[static_cast<size_t>(j)] = j;
  return m;
}

FeatureMap FeatureMap::history2(int p2) {
  FeatureMap m;
  m.x2_cols.resize(static_cast<size_t>(p2));
  for (int j = 0; j < p2; ++j) m.x2_cols[static_cast<size_t>(j)] = j;
  return m;
}

int FeatureMap::dim() const {
  return 1 + static_cast<int>(x1_cols.size()) + (include_a1 ? 1 : 0) +
         static_cast<int>(x2_cols.size());
}

std::vector<std::string> FeatureMap::names() const {
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(dim()));
  out.push_back("1");
  for (int j : x1_cols) out.push_back("x1_" + std::to_string(j + 1));
  if (include_a1) out.push_back("a1");
  for (int j : x2_cols) out.push_back("x2_" + std::to_string(j + 1));
  return out;
}

Eigen::VectorXd FeatureMap::build(const Eigen::VectorXd& x1) const {
  if (include_a1 || !x2_cols.empty())
    throw DataError("stage-1 feature map cannot reference a1 or x2");
  Eigen::VectorXd h(dim());
  h(0) = 1.0;
  int k = 1;
  for (int j : x1_cols) {
    if (j < 0 || j >= x1.size()) throw DataError("feature map: x1 column out of range");
    h(k++) = x1(j);
  }
  return h;
}

Eigen::VectorXd FeatureMap::build(const Eigen::VectorXd& x1, int a1,
                                  const Eigen::VectorXd& x2) const {
  Eigen::VectorXd h(dim());
  h(0) = 1.0;
  int k = 1;
  for (int j : x1_cols) {
    if (j < 0 || j >= x1.size()) throw DataError("feature map: x1 column out of range");
    h(k++) = x1(j);
  }
  if (include_a1) h(k++) = static_cast<double>(a1);
  for (int j : x2_cols) {
    if (j < 0 || j >= x2.size()) throw DataError("feature map: x2 column out of range");
    h(k++) = x2(j);
  }
  return h;
}

int Regime::pi1(const Eigen::VectorXd& x1) const {
  const int a = pi1_(x1);
  if (a != -1 && a != 1) throw NumericalError("regime rule returned non {-1,+1}");
  return a;
}

int Regime::pi2(const Eigen::VectorXd& x1, int a1, const Eigen::VectorXd& x2) const {
  const int a = pi2_(x1, a1, x2);
  if (a != -1 && a != 1) throw NumericalError("regime rule returned non {-1,+1}");
  return a;
}

Regime Regime::constant(int action1, int action2) {
  if ((action1 != -1 && action1 != 1) || (action2 != -1 && action2 != 1))
    throw DataError("constant regime actions must be -1 or +1");
  return Regime([action1](const Eigen::VectorXd&) { return action1; },
                [action2](const Eigen::VectorXd&, int, const Eigen::VectorXd&) {
                  return action2;
                });
}

}  // namespace iqlearn
