#include "distopt/problem_io.hpp"

#include "distopt/error.hpp"
#include "distopt/numeric_text.hpp"

namespace distopt {

using nlohmann::json;

namespace {

json Real(double v) { return FormatHex(v); }

double ReadReal(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      return ParseDouble(j.get<std::string>());
    } catch (const ConfigError&) {
    }
  }
  throw ConfigError(where + ": expected a number or hex-float string");
}

json VectorJson(const Vector& v) {
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(Real(v[k]));
  return out;
}

json MatrixJson(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(Real(m(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

Vector ReadVector(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[k] = ReadReal(j[k], where + "[" + std::to_string(k) + "]");
  return v;
}

Matrix ReadMatrix(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 && j[0].is_array() ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string rw = where + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw ConfigError(rw + ": rows must all have " + std::to_string(cols) + " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = ReadReal(j[r][c], rw + "[" + std::to_string(c) + "]");
  }
  return m;
}

const json& Field(const json& doc, const char* key, const std::string& where) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ConfigError(where + ": missing field '" + key + "'");
  return *it;
}

void RejectUnknown(const json& doc, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, value] : doc.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

std::uint64_t ReadSeed(const json& j, const std::string& where) {
  if (!j.is_number_unsigned() && !j.is_number_integer()) throw ConfigError(where + ": seed must be an integer");
  return j.get<std::uint64_t>();
}

int ReadInt(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return j.get<int>();
}

}  // namespace

json ToJson(const TargetTrackingSpec& s) {
  json doc;
  doc["schema_version"] = kProblemSchemaVersion;
  doc["kind"] = "target_tracking";
  doc["N"] = s.N;
  doc["T"] = s.T;
  doc["seed"] = s.seed;
  json a = json::array(), q = json::array();
  for (const auto& m : s.A_t) a.push_back(MatrixJson(m));
  for (const auto& m : s.Q_t) q.push_back(MatrixJson(m));
  doc["A_t"] = std::move(a);
  doc["Q_t"] = std::move(q);
  json c = json::array(), r = json::array(), ti = json::array(), y = json::array();
  for (int i = 0; i < s.N; ++i) {
    json ci = json::array(), ri = json::array(), yi = json::array();
    for (const auto& m : s.C_it[i]) ci.push_back(MatrixJson(m));
    for (const auto& m : s.R_it[i]) ri.push_back(MatrixJson(m));
    if (i < static_cast<int>(s.y_it.size())) {
      for (const auto& v : s.y_it[i]) yi.push_back(VectorJson(v));
    }
    c.push_back(std::move(ci));
    r.push_back(std::move(ri));
    ti.push_back(s.T_i[i]);
    y.push_back(std::move(yi));
  }
  doc["C_it"] = std::move(c);
  doc["R_it"] = std::move(r);
  doc["T_i"] = std::move(ti);
  doc["y_it"] = std::move(y);
  doc["x0_bar"] = VectorJson(s.x0_bar);
  doc["P0_bar"] = MatrixJson(s.P0_bar);
  return doc;
}

TargetTrackingSpec TrackingSpecFromJson(const json& doc) {
  const std::string w = "target_tracking";
  if (!doc.is_object()) throw ConfigError(w + ": expected an object");
  RejectUnknown(doc, {"schema_version", "kind", "N", "T", "seed", "A_t", "Q_t", "C_it", "R_it", "T_i",
                      "y_it", "x0_bar", "P0_bar"}, w);
  TargetTrackingSpec s;
  s.N = ReadInt(Field(doc, "N", w), w + ".N");
  s.T = ReadInt(Field(doc, "T", w), w + ".T");
  if (s.N <= 0 || s.T <= 0) throw ConfigError(w + ": N and T must be positive");
  s.seed = doc.contains("seed") ? ReadSeed(doc["seed"], w + ".seed") : 0;
  const auto& a = Field(doc, "A_t", w);
  const auto& q = Field(doc, "Q_t", w);
  if (!a.is_array() || !q.is_array()) throw ConfigError(w + ": A_t and Q_t must be arrays");
  for (std::size_t t = 0; t < a.size(); ++t) s.A_t.push_back(ReadMatrix(a[t], w + ".A_t[" + std::to_string(t) + "]"));
  for (std::size_t t = 0; t < q.size(); ++t) s.Q_t.push_back(ReadMatrix(q[t], w + ".Q_t[" + std::to_string(t) + "]"));
  const auto& c = Field(doc, "C_it", w);
  const auto& r = Field(doc, "R_it", w);
  const auto& ti = Field(doc, "T_i", w);
  const auto& y = Field(doc, "y_it", w);
  if (!c.is_array() || !r.is_array() || !ti.is_array() || !y.is_array() ||
      static_cast<int>(c.size()) != s.N || static_cast<int>(r.size()) != s.N ||
      static_cast<int>(ti.size()) != s.N || static_cast<int>(y.size()) != s.N) {
    throw ConfigError(w + ": C_it, R_it, T_i and y_it must be arrays of length N");
  }
  s.C_it.resize(s.N);
  s.R_it.resize(s.N);
  s.T_i.resize(s.N);
  s.y_it.resize(s.N);
  for (int i = 0; i < s.N; ++i) {
    const std::string wi = "[" + std::to_string(i) + "]";
    for (std::size_t t = 0; t < c[i].size(); ++t) s.C_it[i].push_back(ReadMatrix(c[i][t], w + ".C_it" + wi));
    for (std::size_t t = 0; t < r[i].size(); ++t) s.R_it[i].push_back(ReadMatrix(r[i][t], w + ".R_it" + wi));
    for (const auto& t : ti[i]) s.T_i[i].push_back(ReadInt(t, w + ".T_i" + wi));
    for (std::size_t k = 0; k < y[i].size(); ++k) s.y_it[i].push_back(ReadVector(y[i][k], w + ".y_it" + wi));
  }
  s.x0_bar = ReadVector(Field(doc, "x0_bar", w), w + ".x0_bar");
  s.P0_bar = ReadMatrix(Field(doc, "P0_bar", w), w + ".P0_bar");
  return s;
}

json ToJson(const FactoredLeastSquaresSpec& s) {
  json doc;
  doc["schema_version"] = kProblemSchemaVersion;
  doc["kind"] = "factored_ls";
  doc["N"] = s.N;
  doc["n"] = s.n;
  doc["seed"] = s.seed;
  json blocks = json::array();
  for (const auto& b : s.blocks) {
    json jb;
    jb["G_i"] = MatrixJson(b.G);
    if (b.diagonal_weight()) {
      jb["M_i_diag"] = VectorJson(b.M_diag);
    } else {
      jb["M_i"] = MatrixJson(b.M);
    }
    jb["z_i"] = VectorJson(b.z);
    blocks.push_back(std::move(jb));
  }
  doc["blocks"] = std::move(blocks);
  return doc;
}

FactoredLeastSquaresSpec FactoredSpecFromJson(const json& doc) {
  const std::string w = "factored_ls";
  if (!doc.is_object()) throw ConfigError(w + ": expected an object");
  RejectUnknown(doc, {"schema_version", "kind", "N", "n", "seed", "blocks"}, w);
  FactoredLeastSquaresSpec s;
  s.N = ReadInt(Field(doc, "N", w), w + ".N");
  s.n = ReadInt(Field(doc, "n", w), w + ".n");
  s.seed = doc.contains("seed") ? ReadSeed(doc["seed"], w + ".seed") : 0;
  const auto& blocks = Field(doc, "blocks", w);
  if (!blocks.is_array()) throw ConfigError(w + ".blocks: expected an array");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string wb = w + ".blocks[" + std::to_string(i) + "]";
    const auto& jb = blocks[i];
    RejectUnknown(jb, {"G_i", "M_i", "M_i_diag", "z_i"}, wb);
    FactoredBlock b;
    b.G = ReadMatrix(Field(jb, "G_i", wb), wb + ".G_i");
    if (jb.contains("M_i")) {
      b.M = ReadMatrix(jb["M_i"], wb + ".M_i");
    } else {
      b.M_diag = ReadVector(Field(jb, "M_i_diag", wb), wb + ".M_i_diag");
    }
    b.z = ReadVector(Field(jb, "z_i", wb), wb + ".z_i");
    s.blocks.push_back(std::move(b));
  }
  return s;
}

ProblemSpec ProblemSpecFromJson(const json& doc) {
  if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string()) {
    throw ConfigError("problem document needs a string field 'kind'");
  }
  if (doc.contains("schema_version") && doc["schema_version"] != kProblemSchemaVersion) {
    throw ConfigError("unsupported problem schema_version " + doc["schema_version"].dump());
  }
  const auto kind = doc["kind"].get<std::string>();
  if (kind == "target_tracking") return TrackingSpecFromJson(doc);
  if (kind == "factored_ls") return FactoredSpecFromJson(doc);
  throw ConfigError("unknown problem kind '" + kind + "'");
}

SeparableProblem BuildProblem(const ProblemSpec& spec) {
  return std::visit(
      [](const auto& s) -> SeparableProblem {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TargetTrackingSpec>) {
          return BuildTargetTracking(s);
        } else {
          return BuildFactoredLs(s);
        }
      },
      spec);
}

}  // namespace distopt
