#include "iqlearn/io.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace iqlearn {

std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("could not parse number '" + s + "' " + where);
  }
}

int parse_treatment(const std::string& s, const std::string& where) {
  const double v = parse_double(s, where);
  if (v == 1.0) return 1;
  if (v == -1.0) return -1;
  throw DataError("invalid treatment code '" + s + "' " + where);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  return out;
}

}  // namespace

void write_table(const std::string& path, const Table& table) {
  std::ofstream out = open_output(path);
  for (const auto& m : table.meta) out << "# " << m << "\n";
  for (size_t c = 0; c < table.columns.size(); ++c)
    out << (c ? "," : "") << table.columns[c];
  out << "\n";
  for (const auto& row : table.rows) {
    for (size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    out << "\n";
  }
}

Table read_table(const std::string& path) {
  std::ifstream in = open_input(path);
  Table t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    line = strip(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.meta.push_back(strip(line.substr(1)));
      continue;
    }
    if (!have_header) {
      for (auto& c : split_csv_line(line)) t.columns.push_back(strip(c));
      have_header = true;
      continue;
    }
    auto fields = split_csv_line(line);
    if (fields.size() != t.columns.size())
      throw DataError("ragged CSV row in " + path);
    for (auto& f : fields) f = strip(f);
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw DataError("missing CSV header in " + path);
  return t;
}

namespace {

struct SchemaColumns {
  std::vector<int> x1, x2;
  int a1 = -1, a2 = -1, y = -1;
};

// Matches either the generic or the named two-stage header.
SchemaColumns detect_schema(const std::vector<std::string>& cols,
                            const std::string& path) {
  SchemaColumns sc;
  auto find = [&](const std::string& name) {
    for (size_t i = 0; i < cols.size(); ++i)
      if (cols[i] == name) return static_cast<int>(i);
    return -1;
  };
  if (find("qids0") >= 0) {
    const char* names[] = {"qids0", "slope0", "A1", "qids1", "slope1", "A2", "Y"};
    for (const char* n : names)
      if (find(n) < 0)
        throw DataError("named schema in " + path + " is missing column " + n);
    sc.x1 = {find("qids0"), find("slope0")};
    sc.a1 = find("A1");
    sc.x2 = {find("qids1"), find("slope1")};
    sc.a2 = find("A2");
    sc.y = find("Y");
    return sc;
  }
  sc.a1 = find("a1");
  sc.a2 = find("a2");
  sc.y = find("y");
  if (sc.a1 < 0 || sc.a2 < 0 || sc.y < 0)
    throw DataError("unrecognized dataset header in " + path);
  for (int p = 1;; ++p) {
    const int c = find("x1_" + std::to_string(p));
    if (c < 0) break;
    sc.x1.push_back(c);
  }
  for (int p = 1;; ++p) {
    const int c = find("x2_" + std::to_string(p));
    if (c < 0) break;
    sc.x2.push_back(c);
  }
  if (sc.x1.empty() || sc.x2.empty())
    throw DataError("dataset header in " + path + " has no covariate columns");
  return sc;
}

}  // namespace

Dataset read_dataset_csv(const std::string& path) {
  const Table t = read_table(path);
  const SchemaColumns sc = detect_schema(t.columns, path);
  std::vector<Trajectory> rows;
  rows.reserve(t.rows.size());
  for (size_t i = 0; i < t.rows.size(); ++i) {
    const auto& f = t.rows[i];
    const std::string where = "at data row " + std::to_string(i);
    Trajectory tr;
    tr.x1.resize(static_cast<Eigen::Index>(sc.x1.size()));
    for (size_t j = 0; j < sc.x1.size(); ++j)
      tr.x1(static_cast<Eigen::Index>(j)) =
          parse_double(f[static_cast<size_t>(sc.x1[j])], where);
    tr.a1 = parse_treatment(f[static_cast<size_t>(sc.a1)], where);
    tr.x2.resize(static_cast<Eigen::Index>(sc.x2.size()));
    for (size_t j = 0; j < sc.x2.size(); ++j)
      tr.x2(static_cast<Eigen::Index>(j)) =
          parse_double(f[static_cast<size_t>(sc.x2[j])], where);
    tr.a2 = parse_treatment(f[static_cast<size_t>(sc.a2)], where);
    tr.y = parse_double(f[static_cast<size_t>(sc.y)], where);
    rows.push_back(std::move(tr));
  }
  return Dataset::validate(std::move(rows));
}

void write_dataset_csv(const std::string& path, const Dataset& data,
                       const std::vector<std::string>& meta) {
  Table t;
  t.meta = meta;
  for (int j = 1; j <= data.p1(); ++j)
    t.columns.push_back("x1_" + std::to_string(j));
  t.columns.push_back("a1");
  for (int j = 1; j <= data.p2(); ++j)
    t.columns.push_back("x2_" + std::to_string(j));
  t.columns.push_back("a2");
  t.columns.push_back("y");
  for (int i = 0; i < data.n(); ++i) {
    const auto& r = data.row(i);
    std::vector<std::string> row;
    for (int j = 0; j < data.p1(); ++j) row.push_back(format_g9(r.x1(j)));
    row.push_back(std::to_string(r.a1));
    for (int j = 0; j < data.p2(); ++j) row.push_back(format_g9(r.x2(j)));
    row.push_back(std::to_string(r.a2));
    row.push_back(format_g9(r.y));
    t.rows.push_back(std::move(row));
  }
  write_table(path, t);
}

std::vector<Eigen::VectorXd> read_h1_grid(const std::string& path) {
  const Table t = read_table(path);
  std::vector<int> cols;
  auto find = [&](const std::string& name) {
    for (size_t i = 0; i < t.columns.size(); ++i)
      if (t.columns[i] == name) return static_cast<int>(i);
    return -1;
  };
  if (find("qids0") >= 0 && find("slope0") >= 0) {
    cols = {find("qids0"), find("slope0")};
  } else {
    for (int p = 1;; ++p) {
      const int c = find("x1_" + std::to_string(p));
      if (c < 0) break;
      cols.push_back(c);
    }
  }
  if (cols.empty()) throw DataError("h1 grid " + path + " has no x1 columns");
  std::vector<Eigen::VectorXd> out;
  out.reserve(t.rows.size());
  for (size_t i = 0; i < t.rows.size(); ++i) {
    Eigen::VectorXd x1(static_cast<Eigen::Index>(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j)
      x1(static_cast<Eigen::Index>(j)) =
          parse_double(t.rows[i][static_cast<size_t>(cols[j])],
                       "at grid row " + std::to_string(i));
    out.push_back(std::move(x1));
  }
  if (out.empty()) throw DataError("h1 grid " + path + " is empty");
  return out;
}

namespace {

ordered_json coefficients_json(const std::vector<std::string>& names,
                               const Eigen::VectorXd& values) {
  ordered_json j = ordered_json::object();
  for (size_t i = 0; i < names.size(); ++i)
    j[names[i]] = values(static_cast<Eigen::Index>(i));
  return j;
}

}  // namespace

ordered_json stage2_to_json(const FittedStage2& fit) {
  ordered_json j;
  j["main"] = coefficients_json(fit.spec.main.names(), fit.beta20);
  j["interaction"] =
      coefficients_json(fit.spec.interaction.names(), fit.beta21);
  j["residual_sd"] = fit.sigma_hat();
  return j;
}

ordered_json cdf_to_json(const ResidualCdf& cdf) {
  ordered_json j;
  switch (cdf.kind()) {
    case CdfKind::NormalScale:
      j["kind"] = "normal";
      j["sigma"] = cdf.sigma_hat();
      break;
    case CdfKind::Empirical:
      j["kind"] = "empirical";
      j["n"] = cdf.sorted_residuals().size();
      break;
    case CdfKind::HeteroScale: {
      j["kind"] = "hetero";
      j["scale_coef"] = std::vector<double>(
          cdf.scale_coef().data(),
          cdf.scale_coef().data() + cdf.scale_coef().size());
      break;
    }
  }
  return j;
}

ordered_json joint_to_json(const ConditionalJoint& cj) {
  ordered_json j;
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  j["m_model"] = {{"theta", vec(cj.m_model.theta)}, {"gamma", vec(cj.m_model.gamma)}};
  j["c_model"] = {{"theta", vec(cj.c_model.theta)}, {"gamma", vec(cj.c_model.gamma)}};
  if (cj.kind == JointKind::GaussianCopula) {
    j["dependence"] = "gaussian-copula";
    j["copula_r"] = cj.copula_r;
    j["residuals_m"] = cj.sorted_em;
    j["residuals_c"] = cj.sorted_ec;
  } else {
    j["dependence"] = "bivariate-kde";
    j["bandwidth_m"] = cj.bandwidth_m;
    j["bandwidth_c"] = cj.bandwidth_c;
    j["residuals_m"] = cj.kde_em;
    j["residuals_c"] = cj.kde_ec;
  }
  return j;
}

ordered_json feature_map_to_json(const FeatureMap& map) {
  ordered_json j;
  j["x1_cols"] = map.x1_cols;
  j["include_a1"] = map.include_a1;
  j["x2_cols"] = map.x2_cols;
  return j;
}

FeatureMap feature_map_from_json(const ordered_json& j) {
  FeatureMap m;
  if (j.contains("x1_cols")) m.x1_cols = j["x1_cols"].get<std::vector<int>>();
  if (j.contains("include_a1")) m.include_a1 = j["include_a1"].get<bool>();
  if (j.contains("x2_cols")) m.x2_cols = j["x2_cols"].get<std::vector<int>>();
  return m;
}

namespace {

Regime::Rule1 rule1_from_json(const ordered_json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "constant") {
    const int action = j.at("action").get<int>();
    if (action != -1 && action != 1)
      throw DataError("regime file: constant action must be -1 or +1");
    return [action](const Eigen::VectorXd&) { return action; };
  }
  if (type == "linear") {
    const auto coef = j.at("coef").get<std::vector<double>>();
    FeatureMap map = j.contains("features")
                         ? feature_map_from_json(j["features"])
                         : FeatureMap::history1(static_cast<int>(coef.size()) - 1);
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(
        coef.data(), static_cast<Eigen::Index>(coef.size()));
    return [map, b](const Eigen::VectorXd& x1) {
      return sgn(map.build(x1).dot(b));
    };
  }
  throw DataError("regime file: unknown pi1 rule type '" + type + "'");
}

Regime::Rule2 rule2_from_json(const ordered_json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "constant") {
    const int action = j.at("action").get<int>();
    if (action != -1 && action != 1)
      throw DataError("regime file: constant action must be -1 or +1");
    return [action](const Eigen::VectorXd&, int, const Eigen::VectorXd&) {
      return action;
    };
  }
  if (type == "linear") {
    const auto coef = j.at("coef").get<std::vector<double>>();
    FeatureMap map = j.contains("features")
                         ? feature_map_from_json(j["features"])
                         : FeatureMap::history2(static_cast<int>(coef.size()) - 1);
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(
        coef.data(), static_cast<Eigen::Index>(coef.size()));
    return [map, b](const Eigen::VectorXd& x1, int a1, const Eigen::VectorXd& x2) {
      return sgn(map.build(x1, a1, x2).dot(b));
    };
  }
  throw DataError("regime file: unknown pi2 rule type '" + type + "'");
}

}  // namespace

Regime regime_from_json_file(const std::string& path) {
  std::ifstream in = open_input(path);
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("cannot parse regime JSON " + path + ": " + e.what());
  }
  if (!j.contains("pi1") || !j.contains("pi2"))
    throw DataError("regime file " + path + " must define pi1 and pi2");
  return Regime(rule1_from_json(j["pi1"]), rule2_from_json(j["pi2"]));
}

}  // namespace iqlearn
