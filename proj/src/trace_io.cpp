#include "distopt/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "distopt/error.hpp"
#include "distopt/numeric_text.hpp"

namespace distopt {

namespace {

std::string Hex64(std::uint64_t v) {
  char buf[19] = "0x";
  auto r = std::to_chars(buf + 2, buf + sizeof buf, v, 16);
  return std::string(buf, r.ptr);
}

std::uint64_t ParseHex64(const std::string& s) {
  std::uint64_t v = 0;
  const char* b = s.data() + (s.rfind("0x", 0) == 0 ? 2 : 0);
  auto r = std::from_chars(b, s.data() + s.size(), v, 16);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ConfigError("bad fingerprint '" + s + "'");
  }
  return v;
}

template <typename T>
T ParseInt(std::string_view field, std::string_view name, int line) {
  T v{};
  auto r = std::from_chars(field.data(), field.data() + field.size(), v);
  if (r.ec != std::errc() || r.ptr != field.data() + field.size()) {
    throw ConfigError("trace line " + std::to_string(line) + ": bad " + std::string(name) +
                      " '" + std::string(field) + "'");
  }
  return v;
}

nlohmann::json VectorJson(const Vector& v) {
  auto a = nlohmann::json::array();
  for (double x : v) a.push_back(RealToJson(x));
  return a;
}

Vector VectorFromJson(const nlohmann::json& a) {
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = RealFromJson(a[i]);
  return v;
}

}  // namespace

nlohmann::json RealToJson(double v) {
  if (std::isfinite(v)) return v;
  return FormatDecimal(v);
}

double RealFromJson(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return ParseDouble(v.get<std::string>());
  throw ConfigError("expected a real, got " + v.dump());
}

std::string TraceCsv(const RunTrace& trace) {
  std::string out(kTraceCsvHeader);
  out += '\n';
  for (const auto& r : trace.records) {
    out += std::to_string(r.iter);
    out += ',';
    out += FormatDecimal(r.mse);
    out += ',';
    out += FormatDecimal(r.consensus_residual);
    out += ',';
    out += std::to_string(r.bytes_sent);
    out += ',';
    out += std::to_string(r.packets_sent);
    out += ',';
    out += std::to_string(r.wall_ns);
    out += ',';
    out += r.diverged ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::vector<IterationRecord> ParseTraceCsv(std::string_view text) {
  std::vector<IterationRecord> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != kTraceCsvHeader) {
        throw ConfigError("trace header mismatch: expected '" + std::string(kTraceCsvHeader) + "'");
      }
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::size_t s = 0;
    for (;;) {
      std::size_t c = line.find(',', s);
      f.push_back(line.substr(s, c == std::string_view::npos ? c : c - s));
      if (c == std::string_view::npos) break;
      s = c + 1;
    }
    if (f.size() != 7) {
      throw ConfigError("trace line " + std::to_string(line_no) + ": expected 7 fields, got " +
                        std::to_string(f.size()));
    }
    IterationRecord r;
    r.iter = ParseInt<std::int64_t>(f[0], "iter", line_no);
    r.mse = ParseDouble(f[1]);
    r.consensus_residual = ParseDouble(f[2]);
    r.bytes_sent = ParseInt<std::uint64_t>(f[3], "bytes_sent", line_no);
    r.packets_sent = ParseInt<std::uint64_t>(f[4], "packets_sent", line_no);
    r.wall_ns = ParseInt<std::int64_t>(f[5], "wall_ns", line_no);
    const int d = ParseInt<int>(f[6], "diverged", line_no);
    if (d != 0 && d != 1) throw ConfigError("trace line " + std::to_string(line_no) + ": diverged must be 0 or 1");
    r.diverged = d == 1;
    out.push_back(r);
  }
  if (line_no == 0) throw ConfigError("empty trace");
  return out;
}

nlohmann::json TraceSidecar(const RunTrace& trace) {
  const RunHeader& h = trace.header;
  nlohmann::json j;
  j["schema_version"] = h.schema_version;
  j["algorithm"] = h.algorithm;
  j["parameter"] = RealToJson(h.parameter);
  j["schedule"] = h.schedule;
  if (!h.robot_parameters.empty()) {
    auto a = nlohmann::json::array();
    for (double p : h.robot_parameters) a.push_back(RealToJson(p));
    j["robot_parameters"] = a;
  }
  j["topology_model"] = h.topology_model;
  j["drop_probability"] = h.drop_probability;
  j["topology_seed"] = h.topology_seed;
  j["seed"] = h.seed;
  j["weights"] = h.weights;
  j["problem_fingerprint"] = Hex64(h.problem_fingerprint);
  j["graph_fingerprint"] = Hex64(h.graph_fingerprint);
  j["problem_label"] = h.problem_label;
  j["robots"] = h.robots;
  j["dimension"] = h.dimension;
  j["max_iters"] = h.max_iters;
  j["mse_threshold"] = h.mse_threshold;
  j["residual_threshold"] =
      h.residual_threshold ? nlohmann::json(*h.residual_threshold) : nlohmann::json(nullptr);
  j["payload_bytes"] = h.payload_bytes ? nlohmann::json(*h.payload_bytes) : nlohmann::json(nullptr);
  j["mse_definition"] = h.mse_definition;
  j["weight_renormalizations"] = h.weight_renormalizations;
  j["converged"] = h.converged;
  j["diverged"] = h.diverged;
  j["iterations_to_threshold"] = h.iterations_to_threshold
                                     ? nlohmann::json(*h.iterations_to_threshold)
                                     : nlohmann::json(nullptr);
  j["iterations_run"] = h.iterations_run;
  j["oracle"] = VectorJson(trace.oracle);
  auto xs = nlohmann::json::array();
  for (const auto& x : trace.final_x) xs.push_back(VectorJson(x));
  j["final_x"] = xs;
  return j;
}

RunTrace ParseTrace(std::string_view csv, const nlohmann::json& j) {
  RunTrace t;
  try {
    RunHeader& h = t.header;
    h.schema_version = j.at("schema_version").get<int>();
    if (h.schema_version != kTraceSchemaVersion) {
      throw ConfigError("unsupported trace schema_version " + std::to_string(h.schema_version));
    }
    h.algorithm = j.at("algorithm").get<std::string>();
    h.parameter = RealFromJson(j.at("parameter"));
    h.schedule = j.at("schedule").get<std::string>();
    if (j.contains("robot_parameters")) {
      for (const auto& p : j["robot_parameters"]) h.robot_parameters.push_back(RealFromJson(p));
    }
    h.topology_model = j.at("topology_model").get<std::string>();
    h.drop_probability = j.at("drop_probability").get<double>();
    h.topology_seed = j.at("topology_seed").get<std::uint64_t>();
    h.seed = j.at("seed").get<std::uint64_t>();
    h.weights = j.at("weights").get<std::string>();
    h.problem_fingerprint = ParseHex64(j.at("problem_fingerprint").get<std::string>());
    h.graph_fingerprint = ParseHex64(j.at("graph_fingerprint").get<std::string>());
    h.problem_label = j.at("problem_label").get<std::string>();
    h.robots = j.at("robots").get<int>();
    h.dimension = j.at("dimension").get<int>();
    h.max_iters = j.at("max_iters").get<std::int64_t>();
    h.mse_threshold = j.at("mse_threshold").get<double>();
    if (!j.at("residual_threshold").is_null()) h.residual_threshold = j["residual_threshold"].get<double>();
    if (!j.at("payload_bytes").is_null()) h.payload_bytes = j["payload_bytes"].get<std::int64_t>();
    h.mse_definition = j.at("mse_definition").get<std::string>();
    h.weight_renormalizations = j.at("weight_renormalizations").get<std::int64_t>();
    h.converged = j.at("converged").get<bool>();
    h.diverged = j.at("diverged").get<bool>();
    if (!j.at("iterations_to_threshold").is_null()) {
      h.iterations_to_threshold = j["iterations_to_threshold"].get<std::int64_t>();
    }
    h.iterations_run = j.at("iterations_run").get<std::int64_t>();
    t.oracle = VectorFromJson(j.at("oracle"));
    for (const auto& x : j.at("final_x")) t.final_x.push_back(VectorFromJson(x));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("trace sidecar: ") + e.what());
  }
  t.records = ParseTraceCsv(csv);
  return t;
}

void WriteFileAtomic(const std::filesystem::path& path, std::string_view contents) {
  static thread_local std::mt19937_64 tag_rng{std::random_device{}()};
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(tag_rng() & 0xffffff);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTrace(const RunTrace& trace, const std::filesystem::path& stem) {
  std::filesystem::path csv = stem, json = stem;
  csv += ".csv";
  json += ".json";
  WriteFileAtomic(csv, TraceCsv(trace));
  WriteFileAtomic(json, TraceSidecar(trace).dump(2) + "\n");
}

RunTrace ReadTrace(const std::filesystem::path& stem) {
  std::filesystem::path csv = stem, json = stem;
  csv += ".csv";
  json += ".json";
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(ReadFile(json));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(json.string() + ": " + e.what());
  }
  return ParseTrace(ReadFile(csv), sidecar);
}

}  // namespace distopt
