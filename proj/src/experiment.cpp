#include "distopt/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "distopt/error.hpp"
#include "distopt/numeric_text.hpp"
#include "distopt/random.hpp"
#include "distopt/trace_io.hpp"

namespace distopt {

using json = nlohmann::json;

std::string_view ToString(ExperimentMode mode) {
  switch (mode) {
    case ExperimentMode::kRun:
      return "run";
    case ExperimentMode::kSweep:
      return "sweep";
    case ExperimentMode::kDrops:
      return "drops";
  }
  return "?";
}

ExperimentMode ParseMode(std::string_view name) {
  if (name == "run") return ExperimentMode::kRun;
  if (name == "sweep") return ExperimentMode::kSweep;
  if (name == "drops") return ExperimentMode::kDrops;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected run, sweep or drops)");
}

namespace {

// Object reader that remembers which keys were consumed so leftovers can be rejected.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) Fail(path_, "expected an object");
  }

  [[noreturn]] static void Fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
  }

  std::string At(const std::string& key) const { return path_ + "." + key; }

  const json* Find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  const json& Require(const std::string& key) {
    const json* v = Find(key);
    if (!v) Fail(At(key), "required field is missing");
    return *v;
  }

  static double AsReal(const json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      try {
        return ParseDouble(v.get<std::string>());
      } catch (const ConfigError&) {
      }
    }
    Fail(where, "expected a number, got " + v.dump());
  }

  static std::int64_t AsInt(const json& v, const std::string& where) {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
    }
    Fail(where, "expected an integer, got " + v.dump());
  }

  double Real(const std::string& key, double fallback) {
    const json* v = Find(key);
    return v ? AsReal(*v, At(key)) : fallback;
  }
  std::optional<double> OptReal(const std::string& key) {
    const json* v = Find(key);
    if (!v) return std::nullopt;
    return AsReal(*v, At(key));
  }
  std::int64_t Int(const std::string& key, std::int64_t fallback) {
    const json* v = Find(key);
    return v ? AsInt(*v, At(key)) : fallback;
  }
  std::optional<std::int64_t> OptInt(const std::string& key) {
    const json* v = Find(key);
    if (!v) return std::nullopt;
    return AsInt(*v, At(key));
  }
  std::optional<std::uint64_t> OptSeed(const std::string& key) {
    const json* v = Find(key);
    if (!v) return std::nullopt;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    const auto i = AsInt(*v, At(key));
    if (i < 0) Fail(At(key), "seed must be non-negative");
    return static_cast<std::uint64_t>(i);
  }
  std::string String(const std::string& key, const std::string& fallback) {
    const json* v = Find(key);
    if (!v) return fallback;
    if (!v->is_string()) Fail(At(key), "expected a string, got " + v->dump());
    return v->get<std::string>();
  }
  bool Bool(const std::string& key, bool fallback) {
    const json* v = Find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) Fail(At(key), "expected true or false, got " + v->dump());
    return v->get<bool>();
  }
  const json* Array(const std::string& key) {
    const json* v = Find(key);
    if (v && !v->is_array()) Fail(At(key), "expected an array");
    return v;
  }

  void Finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        std::string allowed;
        for (const auto& k : seen_) allowed += (allowed.empty() ? "" : ", ") + k;
        Fail(At(it.key()), "unknown key (allowed: " + allowed + ")");
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
auto Wrap(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    if (std::string_view(e.what()).starts_with("config.")) throw;
    throw ConfigError(where + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

ProblemConfig ParseProblem(const json& j, const std::string& path) {
  Fields f(j, path);
  ProblemConfig p;
  p.kind = f.String("kind", "");
  p.seed = f.OptSeed("seed");
  if (p.kind == "target_tracking") {
    p.robots = static_cast<int>(f.Int("robots", 0));
    p.timesteps = static_cast<int>(f.Int("timesteps", 0));
    if (p.robots < 1) Fields::Fail(f.At("robots"), "must be a positive integer");
    if (p.timesteps < 2) Fields::Fail(f.At("timesteps"), "must be at least 2");
    auto& d = p.tracking;
    d.dt = f.Real("dt", d.dt);
    d.process_noise = f.Real("process_noise", d.process_noise);
    d.measurement_noise = f.Real("measurement_noise", d.measurement_noise);
    d.prior_covariance = f.Real("prior_covariance", d.prior_covariance);
    d.window = static_cast<int>(f.Int("window", d.window));
    if (!(d.process_noise > 0.0)) Fields::Fail(f.At("process_noise"), "must be positive");
    if (!(d.measurement_noise > 0.0)) Fields::Fail(f.At("measurement_noise"), "must be positive");
    if (!(d.prior_covariance > 0.0)) Fields::Fail(f.At("prior_covariance"), "must be positive");
    if (d.window < 0 || d.window > p.timesteps) {
      Fields::Fail(f.At("window"), "must lie in [0, timesteps]");
    }
  } else if (p.kind == "factored_ls") {
    p.robots = static_cast<int>(f.Int("robots", 0));
    p.dimension = static_cast<int>(f.Int("dimension", 0));
    if (p.robots < 1) Fields::Fail(f.At("robots"), "must be a positive integer");
    if (p.dimension < 1) Fields::Fail(f.At("dimension"), "must be a positive integer");
    if (const json* rows = f.Array("rows")) {
      for (std::size_t i = 0; i < rows->size(); ++i) {
        const auto m = Fields::AsInt((*rows)[i], f.At("rows") + "[" + std::to_string(i) + "]");
        if (m < 1) Fields::Fail(f.At("rows"), "row counts must be positive");
        p.rows.push_back(static_cast<int>(m));
      }
      if (static_cast<int>(p.rows.size()) != p.robots) {
        Fields::Fail(f.At("rows"), "needs one entry per robot");
      }
    }
    p.factored.measurement_noise = f.Real("noise", p.factored.measurement_noise);
    p.factored.weight_lo = f.Real("weight_lo", p.factored.weight_lo);
    p.factored.weight_hi = f.Real("weight_hi", p.factored.weight_hi);
    if (!(p.factored.weight_lo > 0.0) || p.factored.weight_hi < p.factored.weight_lo) {
      Fields::Fail(f.At("weight_lo"), "need 0 < weight_lo <= weight_hi");
    }
  } else if (p.kind == "scalar_consensus") {
    const json* t = f.Array("targets");
    if (!t || t->empty()) Fields::Fail(f.At("targets"), "needs at least one target");
    for (std::size_t i = 0; i < t->size(); ++i) {
      p.targets.push_back(Fields::AsReal((*t)[i], f.At("targets") + "[" + std::to_string(i) + "]"));
    }
    p.robots = static_cast<int>(p.targets.size());
  } else if (p.kind == "file") {
    p.path = f.String("path", "");
    if (p.path.empty()) Fields::Fail(f.At("path"), "required for kind 'file'");
  } else {
    Fields::Fail(f.At("kind"),
                 "expected target_tracking, factored_ls, scalar_consensus or file, got '" + p.kind +
                     "'");
  }
  f.Finish();
  return p;
}

GraphConfig ParseGraph(const json& j, const std::string& path) {
  Fields f(j, path);
  GraphConfig g;
  g.kind = f.String("kind", "");
  if (g.kind == "geometric") {
    g.radius = f.Real("radius", g.radius);
    if (!(g.radius > 0.0) || g.radius > std::sqrt(2.0)) {
      Fields::Fail(f.At("radius"), "must lie in (0, sqrt(2)]");
    }
    g.require_connected = f.Bool("require_connected", true);
    g.seed = f.OptSeed("seed");
  } else if (g.kind == "edges") {
    g.directed = f.Bool("directed", false);
    const json* e = f.Array("edges");
    if (!e) Fields::Fail(f.At("edges"), "required for kind 'edges'");
    for (std::size_t i = 0; i < e->size(); ++i) {
      const std::string w = f.At("edges") + "[" + std::to_string(i) + "]";
      const json& pair = (*e)[i];
      if (!pair.is_array() || pair.size() != 2) Fields::Fail(w, "expected [from, to]");
      g.edges.emplace_back(static_cast<int>(Fields::AsInt(pair[0], w)),
                           static_cast<int>(Fields::AsInt(pair[1], w)));
    }
  } else if (g.kind == "file") {
    g.path = f.String("path", "");
    if (g.path.empty()) Fields::Fail(f.At("path"), "required for kind 'file'");
  } else if (g.kind != "complete" && g.kind != "ring" && g.kind != "path") {
    Fields::Fail(f.At("kind"),
                 "expected geometric, complete, ring, path, edges or file, got '" + g.kind + "'");
  }
  f.Finish();
  return g;
}

TuneConfig ParseTune(const json& j, const std::string& path) {
  Fields f(j, path);
  TuneConfig t;
  t.lo = f.Real("lo", 0.0);
  t.hi = f.Real("hi", 0.0);
  t.budget = static_cast<int>(f.Int("budget", t.budget));
  t.prune = f.Bool("prune", true);
  if (!(t.lo > 0.0) || !(t.hi >= t.lo)) Fields::Fail(path, "need 0 < lo <= hi");
  if (t.budget < 5) Fields::Fail(f.At("budget"), "must be at least 5");
  f.Finish();
  return t;
}

GridConfig ParseGrid(const json& j, const std::string& path) {
  GridConfig g;
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      g.values.push_back(Fields::AsReal(j[i], path + "[" + std::to_string(i) + "]"));
    }
    if (g.values.empty()) Fields::Fail(path, "grid is empty");
  } else {
    Fields f(j, path);
    g.points = static_cast<int>(f.Int("points", 0));
    g.decades = f.Real("decades", 0.0);
    g.lo = f.Real("lo", 0.0);
    g.hi = f.Real("hi", 0.0);
    if (g.points < 1) Fields::Fail(f.At("points"), "grid is empty");
    if (g.decades <= 0.0 && (!(g.lo > 0.0) || !(g.hi >= g.lo))) {
      Fields::Fail(path, "need 0 < lo <= hi, or decades > 0 to center on the tuned value");
    }
    f.Finish();
  }
  for (double v : g.values) {
    if (!(v > 0.0)) Fields::Fail(path, "grid values must be positive");
  }
  return g;
}

AlgorithmConfig ParseAlgorithmEntry(const json& j, const std::string& path) {
  Fields f(j, path);
  AlgorithmConfig a;
  a.kind = Wrap(f.At("name"), [&] { return distopt::ParseAlgorithm(f.String("name", "")); });
  a.schedule = DefaultSchedule(a.kind);
  if (const json* s = f.Find("schedule")) {
    if (!s->is_string()) Fields::Fail(f.At("schedule"), "expected a string");
    a.schedule = Wrap(f.At("schedule"), [&] { return ParseSchedule(s->get<std::string>()); });
  }
  a.param = f.OptReal("param");
  if (a.param && !(*a.param > 0.0)) Fields::Fail(f.At("param"), "must be positive");
  if (const json* t = f.Find("tune")) a.tune = ParseTune(*t, f.At("tune"));
  if (const json* g = f.Find("grid")) a.grid = ParseGrid(*g, f.At("grid"));
  if (const json* rp = f.Array("robot_params")) {
    for (std::size_t i = 0; i < rp->size(); ++i) {
      a.robot_params.push_back(
          Fields::AsReal((*rp)[i], f.At("robot_params") + "[" + std::to_string(i) + "]"));
    }
  }
  if (a.param && a.tune) Fields::Fail(path, "give either 'param' or 'tune', not both");
  if (!a.param && !a.tune && a.robot_params.empty() && !(a.grid && a.grid->decades <= 0.0)) {
    Fields::Fail(path, "needs 'param' or a 'tune' block");
  }
  f.Finish();
  return a;
}

DropsConfig ParseDrops(const json& j, const std::string& path) {
  Fields f(j, path);
  DropsConfig d;
  const json* ps = f.Array("probabilities");
  if (!ps || ps->empty()) Fields::Fail(f.At("probabilities"), "needs at least one probability");
  for (std::size_t i = 0; i < ps->size(); ++i) {
    const std::string w = f.At("probabilities") + "[" + std::to_string(i) + "]";
    const double p = Fields::AsReal((*ps)[i], w);
    if (p < 0.0 || p >= 1.0) Fields::Fail(w, "must lie in [0, 1)");
    d.probabilities.push_back(p);
  }
  if (const json* dir = f.Array("directed")) {
    for (std::size_t i = 0; i < dir->size(); ++i) {
      const std::string w = f.At("directed") + "[" + std::to_string(i) + "]";
      if (!(*dir)[i].is_string()) Fields::Fail(w, "expected an algorithm name");
      d.directed.push_back(Wrap(w, [&] { return distopt::ParseAlgorithm((*dir)[i].get<std::string>()); }));
    }
  }
  d.tune_on_sampled = f.Bool("tune_on_sampled", true);
  f.Finish();
  return d;
}

std::string LineColumn(std::string_view text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

ExperimentConfig ParseExperimentConfig(std::string_view text, std::string_view origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::string msg = e.what();
    const auto cut = msg.find("parse error");
    throw ConfigError(std::string(origin) + ": " + LineColumn(text, e.byte) + ": " +
                      (cut == std::string::npos ? msg : msg.substr(cut)));
  }
  const std::string root = "config";
  Fields f(doc, root);
  ExperimentConfig c;
  c.schema_version = static_cast<int>(f.Int("schema_version", kExperimentSchemaVersion));
  if (c.schema_version != kExperimentSchemaVersion) {
    Fields::Fail(f.At("schema_version"),
                 "unsupported version " + std::to_string(c.schema_version) + " (expected " +
                     std::to_string(kExperimentSchemaVersion) + ")");
  }
  c.name = f.String("name", "experiment");
  if (c.name.empty() || c.name.find('/') != std::string::npos) {
    Fields::Fail(f.At("name"), "must be a non-empty name without '/'");
  }
  c.problem = ParseProblem(f.Require("problem"), f.At("problem"));

  {
    const std::string tp = f.At("topology");
    Fields t(f.Require("topology"), tp);
    c.graph = ParseGraph(t.Require("graph"), t.At("graph"));
    c.model = Wrap(t.At("model"), [&] { return ParseDropModel(t.String("model", "static")); });
    c.drop_probability = t.Real("drop_probability", 0.0);
    if (c.drop_probability < 0.0 || c.drop_probability >= 1.0) {
      Fields::Fail(t.At("drop_probability"), "must lie in [0, 1)");
    }
    t.Finish();
  }
  c.weights =
      Wrap(f.At("weights"), [&] { return ParseWeightsPolicy(f.String("weights", "metropolis")); });

  const json* algs = f.Array("algorithms");
  if (!algs || algs->empty()) Fields::Fail(f.At("algorithms"), "needs at least one algorithm");
  for (std::size_t i = 0; i < algs->size(); ++i) {
    c.algorithms.push_back(ParseAlgorithmEntry((*algs)[i], f.At("algorithms") + "[" + std::to_string(i) + "]"));
  }

  if (const json* s = f.Find("stop")) {
    Fields sf(*s, f.At("stop"));
    c.stop.max_iters = sf.Int("max_iters", c.stop.max_iters);
    c.stop.mse_threshold = sf.Real("mse_threshold", c.stop.mse_threshold);
    c.stop.residual_threshold = sf.OptReal("residual_threshold");
    if (c.stop.max_iters < 0) Fields::Fail(sf.At("max_iters"), "must be non-negative");
    if (!(c.stop.mse_threshold >= 0.0)) Fields::Fail(sf.At("mse_threshold"), "must be non-negative");
    sf.Finish();
  }

  if (const json* s = f.Array("seeds")) {
    if (s->empty()) Fields::Fail(f.At("seeds"), "needs at least one seed");
    c.seeds.clear();
    for (std::size_t i = 0; i < s->size(); ++i) {
      const std::string w = f.At("seeds") + "[" + std::to_string(i) + "]";
      const auto v = Fields::AsInt((*s)[i], w);
      if (v < 0) Fields::Fail(w, "seeds must be non-negative");
      c.seeds.push_back(static_cast<std::uint64_t>(v));
    }
  }
  if (const json* d = f.Find("drops")) c.drops = ParseDrops(*d, f.At("drops"));
  c.output = f.String("output", "out/" + c.name);
  c.workers = static_cast<int>(f.Int("workers", 1));
  if (c.workers < 0) Fields::Fail(f.At("workers"), "must be non-negative (0 = all cores)");
  if (auto pb = f.OptInt("payload_bytes")) {
    if (*pb <= 0) Fields::Fail(f.At("payload_bytes"), "must be positive");
    c.payload_bytes = *pb;
  }
  c.allow_unsupported = f.Bool("allow_unsupported", false);
  c.record_wall_time = f.Bool("record_wall_time", true);
  f.Finish();
  return c;
}

ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path) {
  ExperimentConfig c = ParseExperimentConfig(ReadFile(path), path.string());
  c.base_dir = path.parent_path();
  return c;
}

void ApplyOverrides(ExperimentConfig& c, const ExperimentOverrides& o) {
  if (o.seed_count) {
    if (*o.seed_count < 1) throw ConfigError("--seed-count must be at least 1");
    const std::uint64_t base = c.seeds.empty() ? 1 : c.seeds.front();
    c.seeds.clear();
    for (int i = 0; i < *o.seed_count; ++i) c.seeds.push_back(base + static_cast<std::uint64_t>(i));
  }
  if (o.max_iters) {
    if (*o.max_iters < 0) throw ConfigError("--max-iters must be non-negative");
    c.stop.max_iters = *o.max_iters;
  }
  if (o.output) c.output = *o.output;
  if (o.allow_unsupported) c.allow_unsupported = true;
  if (o.payload_bytes) {
    if (*o.payload_bytes <= 0) throw ConfigError("--payload-bytes must be positive");
    c.payload_bytes = *o.payload_bytes;
  }
  if (o.workers) c.workers = *o.workers;
}

namespace {

std::filesystem::path Resolve(const ExperimentConfig& c, const std::filesystem::path& p) {
  return p.is_absolute() || c.base_dir.empty() ? p : c.base_dir / p;
}

SeparableProblem MakeProblem(const ExperimentConfig& c, std::uint64_t trial_seed) {
  const ProblemConfig& p = c.problem;
  const std::uint64_t s = p.seed.value_or(trial_seed);
  if (p.kind == "target_tracking") {
    return BuildTargetTracking(SimulateTargetData(MakeTrackingSpec(p.robots, p.timesteps, s, p.tracking)));
  }
  if (p.kind == "factored_ls") {
    std::vector<int> rows = p.rows;
    if (rows.empty()) {
      for (int i = 0; i < p.robots; ++i) {
        const double u = ToUnit(CounterHash(s, 0xf00d, static_cast<std::uint64_t>(i)));
        rows.push_back(2 * p.dimension + static_cast<int>(u * (2 * p.dimension + 1)));
      }
    }
    return BuildFactoredLs(GenerateFactoredLs(p.dimension, rows, s, p.factored));
  }
  if (p.kind == "scalar_consensus") return ScalarConsensusProblem(p.targets);
  const auto path = Resolve(c, p.path);
  json doc;
  try {
    doc = json::parse(ReadFile(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return BuildProblem(ProblemSpecFromJson(doc));
}

Graph MakeGraph(const ExperimentConfig& c, int robots, std::uint64_t trial_seed) {
  const GraphConfig& g = c.graph;
  if (g.kind == "geometric") {
    const GeometricGraphSpec spec{robots, g.radius, g.seed.value_or(trial_seed)};
    return g.require_connected ? GenerateConnectedGeometric(spec).graph : GenerateGeometricGraph(spec);
  }
  if (g.kind == "complete") return Graph::Complete(robots);
  if (g.kind == "ring") return Graph::Ring(robots);
  if (g.kind == "path") return Graph::Path(robots);
  if (g.kind == "edges") {
    return Wrap("config.topology.graph.edges", [&] {
      return Graph(robots, g.directed ? Directedness::kDirected : Directedness::kUndirected, g.edges);
    });
  }
  Graph parsed = Graph::Parse(ReadFile(Resolve(c, g.path)));
  if (parsed.size() != robots) {
    throw ConfigError("config.topology.graph.path: graph has " + std::to_string(parsed.size()) +
                      " vertices but the problem has " + std::to_string(robots) + " robots");
  }
  return parsed;
}

struct Trial {
  std::uint64_t seed;
  TrialInstance inst;
};

std::string ProbabilityTag(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", p);
  return buf;
}

class OutputSet {
 public:
  explicit OutputSet(const std::filesystem::path& prefix) : prefix_(prefix) {
    const auto parent = prefix_.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
  }
  std::filesystem::path Path(const std::string& suffix) const {
    std::filesystem::path p = prefix_;
    p += "." + suffix;
    return p;
  }
  void Trace(const RunTrace& t, const std::string& stem) {
    WriteTrace(t, Path(stem));
    files.push_back(Path(stem + ".csv"));
    files.push_back(Path(stem + ".json"));
  }
  void Text(const std::string& suffix, std::string_view contents) {
    WriteFileAtomic(Path(suffix), contents);
    files.push_back(Path(suffix));
  }
  std::vector<std::filesystem::path> files;

 private:
  std::filesystem::path prefix_;
};

json ItersJson(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); }

json MedianJson(double m) { return RealToJson(m); }

RunOptions BaseRunOptions(const ExperimentConfig& c, std::uint64_t seed) {
  RunOptions ro;
  ro.workers = c.workers;
  ro.payload_bytes = c.payload_bytes;
  ro.allow_unsupported = c.allow_unsupported;
  ro.record_wall_time = c.record_wall_time;
  ro.seed = seed;
  return ro;
}

AlgorithmSpec SpecFor(const AlgorithmConfig& a, double param) {
  AlgorithmSpec s;
  s.kind = a.kind;
  s.parameter = param;
  s.schedule = a.schedule;
  s.robot_parameters = a.robot_params;
  return s;
}

// Fixed parameter, or GSS over the given topologies. Writes the probe log when tuning.
// Empty when the search found no convergent parameter.
std::optional<double> ChooseParam(const ExperimentConfig& c, const AlgorithmConfig& a, const SeparableProblem& prob,
                   std::span<const TopologySequence> tune_on, std::uint64_t seed, OutputSet& out,
                   const std::string& stem, json& row) {
  if (!a.tune) {
    const double p = a.param.value_or(a.robot_params.empty() ? 0.0 : a.robot_params.front());
    row["param"] = RealToJson(p);
    row["tuned"] = false;
    return p;
  }
  TuneSpec ts;
  ts.lo = a.tune->lo;
  ts.hi = a.tune->hi;
  ts.budget = a.tune->budget;
  ts.prune = a.tune->prune;
  ts.stop = c.stop;
  ts.run = BaseRunOptions(c, seed);
  ts.run.record_wall_time = false;
  ts.require_convergent = false;
  const TuneResult r = GssTune(ts, prob, SpecFor(a, 1.0), tune_on, c.weights);
  out.Text(stem + ".probes.csv", ProbeLogCsv(r.probes));
  row["tuned"] = true;
  row["tune_probes"] = r.probes.size();
  if (!r.found) {
    row["param"] = nullptr;
    row["tune_failed"] = true;
    return std::nullopt;
  }
  row["param"] = RealToJson(r.best_param);
  return r.best_param;
}

std::string Pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string MedianText(double m) {
  if (!std::isfinite(m)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", m);
  return buf;
}

}  // namespace

double MedianIterations(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::infinity();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

TrialInstance BuildTrial(const ExperimentConfig& c, std::uint64_t seed) {
  TrialInstance t{MakeProblem(c, seed), Graph()};
  t.graph = MakeGraph(c, t.problem.robot_count(), seed);
  return t;
}

void ValidateForMode(const ExperimentConfig& c, ExperimentMode mode) {
  for (std::size_t i = 0; i < c.algorithms.size(); ++i) {
    const auto& a = c.algorithms[i];
    const std::string w = "config.algorithms[" + std::to_string(i) + "]";
    if (mode == ExperimentMode::kSweep) {
      if (!a.grid) throw ConfigError(w + ".grid: sweep mode needs a grid for every algorithm");
      if (a.grid->decades > 0.0 && !a.tune) {
        throw ConfigError(w + ".grid: a centered grid ('decades') needs a 'tune' block");
      }
    }
    if (!a.robot_params.empty() && a.kind != AlgorithmKind::kDgdAtc) {
      throw ConfigError(w + ".robot_params: per-robot step sizes are only supported by dgd-atc");
    }
    if (a.tune && !a.robot_params.empty()) {
      throw ConfigError(w + ": 'tune' and 'robot_params' cannot be combined");
    }
  }
  if (mode == ExperimentMode::kDrops && !c.drops) {
    throw ConfigError("config.drops: drops mode needs a 'drops' block with probabilities");
  }

  // Compatibility is decided by graph directedness and the drop model only.
  const Graph base = MakeGraph(c, c.problem.kind == "file" ? MakeProblem(c, c.seeds.front()).robot_count()
                                                            : c.problem.robots,
                               c.seeds.front());
  for (const auto& a : c.algorithms) {
    if (mode == ExperimentMode::kDrops) {
      const double pmax = *std::max_element(c.drops->probabilities.begin(), c.drops->probabilities.end());
      CheckCompatibility(a.kind, {base, DropModel::kUndirectedDrop, pmax, 0}, c.weights,
                         c.allow_unsupported);
      if (std::find(c.drops->directed.begin(), c.drops->directed.end(), a.kind) !=
          c.drops->directed.end()) {
        CheckCompatibility(a.kind, {base, DropModel::kDirectedDrop, pmax, 0}, c.weights,
                           c.allow_unsupported);
      }
    } else {
      CheckCompatibility(a.kind, {base, c.model, c.drop_probability, 0}, c.weights,
                         c.allow_unsupported);
    }
  }
  if (mode == ExperimentMode::kDrops) {
    for (AlgorithmKind k : c.drops->directed) {
      const bool listed = std::any_of(c.algorithms.begin(), c.algorithms.end(),
                                      [&](const AlgorithmConfig& a) { return a.kind == k; });
      if (!listed) {
        throw ConfigError("config.drops.directed: '" + std::string(ToString(k)) +
                          "' is not among the configured algorithms");
      }
      CheckCompatibility(k, {base, DropModel::kDirectedDrop, 0.5, 0}, c.weights, c.allow_unsupported);
    }
  }
}

namespace {

ExperimentOutcome ExecuteRun(const ExperimentConfig& c, const std::vector<Trial>& trials) {
  ExperimentOutcome res;
  OutputSet out(c.output);
  json rows = json::array();
  std::ostringstream report;
  report << Pad("algorithm", 10) << Pad("param(median)", 16) << Pad("median_iters", 14)
         << Pad("converged", 11) << "diverged\n";
  bool any_diverged = false;
  for (const auto& a : c.algorithms) {
    const std::string alg(ToString(a.kind));
    json row;
    row["algorithm"] = alg;
    row["schedule"] = a.kind == AlgorithmKind::kCadmm ? "none" : std::string(ToString(a.schedule));
    json per_seed = json::array();
    std::vector<double> iters, params;
    int diverged = 0, converged = 0;
    for (const auto& t : trials) {
      const TopologySequence topo{t.inst.graph, c.model, c.drop_probability, t.seed, 1};
      const std::string stem = alg + ".seed" + std::to_string(t.seed);
      json s;
      s["seed"] = t.seed;
      const auto p = ChooseParam(c, a, t.inst.problem, std::span(&topo, 1), t.seed, out, stem, s);
      if (!p) {
        s["iters"] = nullptr;
        s["diverged"] = false;
        s["converged"] = false;
        per_seed.push_back(s);
        iters.push_back(std::numeric_limits<double>::infinity());
        continue;
      }
      const RunTrace tr = Run(t.inst.problem, SpecFor(a, *p), topo, c.weights, c.stop,
                              BaseRunOptions(c, t.seed));
      out.Trace(tr, stem);
      s["iters"] = ItersJson(tr.header.iterations_to_threshold);
      s["diverged"] = tr.header.diverged;
      s["converged"] = tr.header.converged;
      s["final_mse"] = RealToJson(tr.records.back().mse);
      s["trace"] = out.Path(stem + ".csv").filename().string();
      per_seed.push_back(s);
      params.push_back(*p);
      iters.push_back(tr.header.iterations_to_threshold
                          ? static_cast<double>(*tr.header.iterations_to_threshold)
                          : std::numeric_limits<double>::infinity());
      diverged += tr.header.diverged;
      converged += tr.header.converged;
    }
    const double med = MedianIterations(iters);
    row["median_iters"] = MedianJson(med);
    row["divergence_count"] = diverged;
    row["converged_count"] = converged;
    row["trials"] = per_seed;
    rows.push_back(row);
    any_diverged = any_diverged || diverged > 0;
    report << Pad(alg, 10) << Pad(MedianText(MedianIterations(params)), 16)
           << Pad(MedianText(med), 14) << Pad(std::to_string(converged) + "/" + std::to_string(trials.size()), 11)
           << diverged << "\n";
  }
  res.summary["algorithms"] = rows;
  res.exit_code = any_diverged ? static_cast<int>(ErrorCode::kDivergence) : 0;
  res.report = report.str();
  res.summary["mode"] = "run";
  res.files = std::move(out.files);
  return res;
}

ExperimentOutcome ExecuteSweep(const ExperimentConfig& c, const std::vector<Trial>& trials) {
  ExperimentOutcome res;
  OutputSet out(c.output);
  json rows = json::array();
  std::ostringstream report;
  for (const auto& a : c.algorithms) {
    const std::string alg(ToString(a.kind));
    json row;
    row["algorithm"] = alg;
    json per_seed = json::array();
    int divergent = 0;
    std::map<double, std::vector<double>> by_param;
    for (const auto& t : trials) {
      const TopologySequence topo{t.inst.graph, c.model, c.drop_probability, t.seed, 1};
      const std::string stem = alg + ".seed" + std::to_string(t.seed);
      json s;
      s["seed"] = t.seed;
      std::vector<double> grid = a.grid->values;
      if (grid.empty()) {
        if (a.grid->decades > 0.0) {
          const auto tuned =
              ChooseParam(c, a, t.inst.problem, std::span(&topo, 1), t.seed, out, stem, s);
          if (!tuned) {
            throw NumericError(alg + " seed " + std::to_string(t.seed) +
                               ": no convergent parameter in the tune interval to center the grid on");
          }
          const double center = *tuned;
          const double half = std::pow(10.0, 0.5 * a.grid->decades);
          grid = LogGrid(center / half, center * half, a.grid->points);
          s["center"] = RealToJson(center);
        } else {
          grid = LogGrid(a.grid->lo, a.grid->hi, a.grid->points);
        }
      }
      RunOptions ro = BaseRunOptions(c, t.seed);
      ro.record_wall_time = false;
      const auto entries = GridSweep(grid, t.inst.problem, SpecFor(a, 1.0), topo, c.weights,
                                     c.stop, ro, 1);
      out.Text(stem + ".sweep.csv", SweepCsv(entries));
      json e = json::array();
      int d = 0;
      for (const auto& x : entries) {
        e.push_back({{"param", RealToJson(x.param)}, {"iters", ItersJson(x.iters)}, {"diverged", x.diverged}});
        d += x.diverged;
        by_param[x.param].push_back(x.iters ? static_cast<double>(*x.iters)
                                            : std::numeric_limits<double>::infinity());
      }
      s["grid"] = e;
      s["divergent"] = d;
      s["table"] = out.Path(stem + ".sweep.csv").filename().string();
      per_seed.push_back(s);
      divergent += d;
      report << alg << " seed " << t.seed << "\n" << SweepCsv(entries);
    }
    row["divergent_entries"] = divergent;
    row["trials"] = per_seed;
    rows.push_back(row);
  }
  res.summary["algorithms"] = rows;
  res.summary["mode"] = "sweep";
  res.report = report.str();
  res.files = std::move(out.files);
  return res;
}

ExperimentOutcome ExecuteDrops(const ExperimentConfig& c, const std::vector<Trial>& trials) {
  ExperimentOutcome res;
  OutputSet out(c.output);
  json rows = json::array();
  std::ostringstream report;
  report << Pad("algorithm", 10) << Pad("model", 17) << Pad("p", 7) << Pad("median_iters", 14)
         << Pad("converged", 11) << "diverged\n";
  bool any_diverged = false;
  const DropsConfig& d = *c.drops;
  for (double p : d.probabilities) {
    for (const auto& a : c.algorithms) {
      std::vector<DropModel> models{DropModel::kUndirectedDrop};
      if (std::find(d.directed.begin(), d.directed.end(), a.kind) != d.directed.end()) {
        models.push_back(DropModel::kDirectedDrop);
      }
      for (DropModel model : models) {
        const std::string alg(ToString(a.kind));
        json row;
        row["algorithm"] = alg;
        row["model"] = std::string(ToString(model));
        row["drop_probability"] = p;
        json per_seed = json::array();
        std::vector<double> iters;
        int diverged = 0, converged = 0;
        for (const auto& t : trials) {
          const TopologySequence topo{t.inst.graph, model, p, t.seed, 1};
          const TopologySequence static_topo{t.inst.graph, DropModel::kStatic, 0.0, t.seed, 1};
          const std::string stem = "drops." + alg + "." + std::string(ToString(model)) + ".p" +
                                   ProbabilityTag(p) + ".seed" + std::to_string(t.seed);
          json s;
          s["seed"] = t.seed;
          const auto prm = ChooseParam(c, a, t.inst.problem,
                                       std::span(d.tune_on_sampled ? &topo : &static_topo, 1),
                                       t.seed, out, stem, s);
          if (!prm) {
            s["iters"] = nullptr;
            s["diverged"] = false;
            s["converged"] = false;
            per_seed.push_back(s);
            iters.push_back(std::numeric_limits<double>::infinity());
            continue;
          }
          const RunTrace tr = Run(t.inst.problem, SpecFor(a, *prm), topo, c.weights, c.stop,
                                  BaseRunOptions(c, t.seed));
          out.Trace(tr, stem);
          s["iters"] = ItersJson(tr.header.iterations_to_threshold);
          s["diverged"] = tr.header.diverged;
          s["converged"] = tr.header.converged;
          s["trace"] = out.Path(stem + ".csv").filename().string();
          per_seed.push_back(s);
          iters.push_back(tr.header.iterations_to_threshold
                              ? static_cast<double>(*tr.header.iterations_to_threshold)
                              : std::numeric_limits<double>::infinity());
          diverged += tr.header.diverged;
          converged += tr.header.converged;
        }
        const double med = MedianIterations(iters);
        row["median_iters"] = MedianJson(med);
        row["divergence_count"] = diverged;
        row["converged_count"] = converged;
        row["trials"] = per_seed;
        rows.push_back(row);
        any_diverged = any_diverged || diverged > 0;
        report << Pad(alg, 10) << Pad(std::string(ToString(model)), 17) << Pad(ProbabilityTag(p), 7)
               << Pad(MedianText(med), 14)
               << Pad(std::to_string(converged) + "/" + std::to_string(trials.size()), 11) << diverged
               << "\n";
      }
    }
  }
  res.summary["rows"] = rows;
  res.summary["mode"] = "drops";
  res.exit_code = any_diverged ? static_cast<int>(ErrorCode::kDivergence) : 0;
  res.report = report.str();
  res.files = std::move(out.files);
  return res;
}

}  // namespace

ExperimentOutcome Execute(const ExperimentConfig& c, ExperimentMode mode) {
  ValidateForMode(c, mode);
  std::vector<Trial> trials;
  for (std::uint64_t s : c.seeds) trials.push_back({s, BuildTrial(c, s)});

  ExperimentOutcome res;
  switch (mode) {
    case ExperimentMode::kRun:
      res = ExecuteRun(c, trials);
      break;
    case ExperimentMode::kSweep:
      res = ExecuteSweep(c, trials);
      break;
    case ExperimentMode::kDrops:
      res = ExecuteDrops(c, trials);
      break;
  }
  res.summary["schema_version"] = kExperimentSchemaVersion;
  res.summary["name"] = c.name;
  json seeds = json::array();
  for (auto s : c.seeds) seeds.push_back(s);
  res.summary["seeds"] = seeds;
  res.summary["mse_threshold"] = c.stop.mse_threshold;
  res.summary["max_iters"] = c.stop.max_iters;
  res.summary["median_rule"] = "median over seeds; non-converged trials count as +inf";

  std::filesystem::path summary_path = c.output;
  summary_path += ".summary.json";
  WriteFileAtomic(summary_path, res.summary.dump(2) + "\n");
  auto& files = res.files;
  files.erase(std::remove(files.begin(), files.end(), summary_path), files.end());
  files.push_back(summary_path);
  return res;
}

}  // namespace distopt
