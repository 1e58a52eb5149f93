#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "iqlearn/components.hpp"

namespace iqlearn {

using ordered_json = nlohmann::ordered_json;

// Shortest-9-significant-digit formatting used for every numeric field the
// CLI writes; reruns with identical configs are byte-identical.
std::string format_g9(double v);

// Plain CSV with optional "# " metadata lines before the header. Fields
// must not contain commas or quotes (all outputs are numeric or simple
// tokens).
struct Table {
  std::vector<std::string> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

void write_table(const std::string& path, const Table& table);
Table read_table(const std::string& path);

// Dataset CSV ingestion. Accepts either the generic schema
//   x1_1..x1_p1, a1, x2_1..x2_p2, a2, y
// or the named two-stage schema
//   qids0, slope0, A1, qids1, slope1, A2, Y.
// Lines starting with '#' are metadata and skipped.
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const Dataset& data,
                       const std::vector<std::string>& meta = {});

// Baseline-history grid: CSV with columns x1_1..x1_p1 (or qids0, slope0).
std::vector<Eigen::VectorXd> read_h1_grid(const std::string& path);

// JSON summaries of fitted objects.
ordered_json stage2_to_json(const FittedStage2& fit);
ordered_json cdf_to_json(const ResidualCdf& cdf);
ordered_json joint_to_json(const ConditionalJoint& cj);

// Feature maps to/from JSON ({"x1_cols": [...], "include_a1": bool,
// "x2_cols": [...]}).
ordered_json feature_map_to_json(const FeatureMap& map);
FeatureMap feature_map_from_json(const ordered_json& j);

// Regime description files for `value`/`oracle`: either constant rules
// {"pi1": {"type": "constant", "action": 1}, "pi2": {...}} or linear rules
// {"type": "linear", "coef": [...], "features": {...}} (pi1 features are
// over x1 only).
Regime regime_from_json_file(const std::string& path);

}  // namespace iqlearn
