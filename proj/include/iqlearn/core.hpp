#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace iqlearn {

// Invalid or malformed input data (bad treatment codes, dimension
// mismatches, non-finite values, unreadable files). CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures (rank deficiency, divergence, degenerate fits).
// CLI exit code 4.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// sgn(x) = 1 if x >= 0, else -1. The tie convention sgn(0) = +1 is used by
// every decision rule in the library. Rejects non-finite input.
int sgn(double x);

// One patient record: baseline covariates, first treatment, interim
// covariates, second treatment, outcome (larger is better).
struct Trajectory {
  Eigen::VectorXd x1;
  int a1 = 0;
  Eigen::VectorXd x2;
  int a2 = 0;
  double y = 0.0;
};

// Validated collection of trajectories with homogeneous dimensions.
class Dataset {
 public:
  // Checks every invariant: a1, a2 in {-1,+1}, finite values, consistent
  // covariate dimensions (inferred from the first row). Throws DataError
  // with the offending row index.
  static Dataset validate(std::vector<Trajectory> rows);

  int n() const { return static_cast<int>(rows_.size()); }
  int p1() const { return p1_; }
  int p2() const { return p2_; }
  const Trajectory& row(int i) const { return rows_[static_cast<size_t>(i)]; }
  const std::vector<Trajectory>& rows() const { return rows_; }

  // Content hash used as a provenance check between component fits.
  std::uint64_t hash() const { return hash_; }

  // Fits require both treatment arms to be present at each stage.
  void require_both_arms() const;

 private:
  Dataset(std::vector<Trajectory> rows, int p1, int p2, std::uint64_t h)
      : rows_(std::move(rows)), p1_(p1), p2_(p2), hash_(h) {}
  std::vector<Trajectory> rows_;
  int p1_ = 0;
  int p2_ = 0;
  std::uint64_t hash_ = 0;
};

// Histories are feature vectors whose first component is the constant 1.
using History1 = Eigen::VectorXd;
using History2 = Eigen::VectorXd;

// h1 = (1, x1')'.
History1 make_history1(const Eigen::VectorXd& x1);

// Column selector for one linear term. The built vector is always
// (1, x1[x1_cols], a1 if included, x2[x2_cols]). Stage-1 maps use x1 only;
// stage-2 maps may pull in baseline covariates and the first treatment.
struct FeatureMap {
  std::vector<int> x1_cols;
  bool include_a1 = false;
  std::vector<int> x2_cols;

  static FeatureMap history1(int p1);  // (1, x1')'
  static FeatureMap history2(int p2);  // (1, x2')'

  int dim() const;
  std::vector<std::string> names() const;

  // Stage-1 build; throws if the map references a1 or x2.
  Eigen::VectorXd build(const Eigen::VectorXd& x1) const;
  // Full build over the interim history.
  Eigen::VectorXd build(const Eigen::VectorXd& x1, int a1,
                        const Eigen::VectorXd& x2) const;

  bool operator==(const FeatureMap&) const = default;
};

// A pair of deterministic decision rules. pi1 maps the baseline history to
// a first-stage treatment; pi2 maps the interim history to a second-stage
// treatment. Rules always return exactly -1 or +1.
class Regime {
 public:
  using Rule1 = std::function<int(const Eigen::VectorXd& x1)>;
  using Rule2 =
      std::function<int(const Eigen::VectorXd& x1, int a1, const Eigen::VectorXd& x2)>;

  Regime() = default;
  Regime(Rule1 pi1, Rule2 pi2) : pi1_(std::move(pi1)), pi2_(std::move(pi2)) {}

  int pi1(const Eigen::VectorXd& x1) const;
  int pi2(const Eigen::VectorXd& x1, int a1, const Eigen::VectorXd& x2) const;

  static Regime constant(int action1, int action2);

 private:
  Rule1 pi1_;
  Rule2 pi2_;
};

}  // namespace iqlearn
