#include "distopt/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "distopt/error.hpp"
#include "distopt/random.hpp"

namespace distopt {

namespace {

std::vector<int> Reachable(const Graph& g, int start, bool follow_out, bool follow_in) {
  std::vector<char> seen(g.size(), 0);
  std::vector<int> stack{start};
  seen[start] = 1;
  std::vector<int> order;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    order.push_back(u);
    auto visit = [&](std::span<const int> nbrs) {
      for (int v : nbrs) {
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    };
    if (follow_out) visit(g.OutNeighbors(u));
    if (follow_in) visit(g.InNeighbors(u));
  }
  return order;
}

}  // namespace

Graph::Graph(int n_vertices, Directedness directedness, std::vector<Edge> edges)
    : n_(n_vertices), directedness_(directedness) {
  if (n_vertices <= 0) throw ContractViolation("graph needs at least one vertex");
  for (auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n_ || b >= n_) {
      throw ContractViolation("edge (" + std::to_string(a) + "," + std::to_string(b) +
                              ") has an endpoint outside [0," + std::to_string(n_) + ")");
    }
    if (a == b) throw ContractViolation("self-loop at vertex " + std::to_string(a));
    if (!directed() && a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  in_.assign(n_, {});
  out_.assign(n_, {});
  for (const auto& [a, b] : edges_) {
    out_[a].push_back(b);
    in_[b].push_back(a);
    if (!directed()) {
      out_[b].push_back(a);
      in_[a].push_back(b);
    }
  }
  for (auto& v : in_) std::sort(v.begin(), v.end());
  for (auto& v : out_) std::sort(v.begin(), v.end());
}

Graph Graph::Empty(int n, Directedness directedness) { return Graph(n, directedness, {}); }

Graph Graph::Complete(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  return Graph(n, Directedness::kUndirected, std::move(edges));
}

Graph Graph::Path(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return Graph(n, Directedness::kUndirected, std::move(edges));
}

Graph Graph::Ring(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  if (n > 2) edges.emplace_back(0, n - 1);
  return Graph(n, Directedness::kUndirected, std::move(edges));
}

bool Graph::HasArc(int from, int to) const {
  const auto& nbrs = out_[from];
  return std::binary_search(nbrs.begin(), nbrs.end(), to);
}

std::uint64_t Graph::Fingerprint() const {
  std::uint64_t h = CounterHash(static_cast<std::uint64_t>(n_), directed() ? 1 : 0, 0x6a09e667);
  for (const auto& [a, b] : edges_) {
    h = Mix64(h ^ (static_cast<std::uint64_t>(a) << 32 | static_cast<std::uint32_t>(b)));
  }
  return h;
}

std::string Graph::Serialize() const {
  std::ostringstream os;
  os << "n " << n_ << ' ' << (directed() ? "directed" : "undirected") << '\n';
  for (const auto& [a, b] : edges_) os << a << ' ' << b << '\n';
  return os.str();
}

Graph Graph::Parse(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  int line_no = 0;
  int n = -1;
  Directedness dir = Directedness::kUndirected;
  std::vector<Edge> edges;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (n < 0) {
      std::string kind;
      if (first != "n" || !(ls >> n >> kind) || n <= 0) {
        throw ConfigError("graph line " + std::to_string(line_no) +
                          ": expected header 'n <count> <directed|undirected>'");
      }
      if (kind == "directed") {
        dir = Directedness::kDirected;
      } else if (kind != "undirected") {
        throw ConfigError("graph line " + std::to_string(line_no) + ": unknown directedness '" +
                          kind + "'");
      }
      continue;
    }
    int a = 0;
    int b = 0;
    auto res = std::from_chars(first.data(), first.data() + first.size(), a);
    if (res.ec != std::errc{} || !(ls >> b)) {
      throw ConfigError("graph line " + std::to_string(line_no) + ": expected 'i j'");
    }
    if (a < 0 || b < 0 || a >= n || b >= n || a == b) {
      throw ConfigError("graph line " + std::to_string(line_no) + ": invalid edge " +
                        std::to_string(a) + " " + std::to_string(b));
    }
    edges.emplace_back(a, b);
  }
  if (n < 0) throw ConfigError("graph text has no header line");
  return Graph(n, dir, std::move(edges));
}

bool IsConnected(const Graph& g) {
  if (g.directed()) throw ContractViolation("IsConnected requires an undirected graph");
  return static_cast<int>(Reachable(g, 0, true, false).size()) == g.size();
}

bool IsStronglyConnected(const Graph& g) {
  if (!g.directed()) throw ContractViolation("IsStronglyConnected requires a directed graph");
  return static_cast<int>(Reachable(g, 0, true, false).size()) == g.size() &&
         static_cast<int>(Reachable(g, 0, false, true).size()) == g.size();
}

bool IsWeaklyConnected(const Graph& g) {
  if (!g.directed()) throw ContractViolation("IsWeaklyConnected requires a directed graph");
  return static_cast<int>(Reachable(g, 0, true, true).size()) == g.size();
}

Graph AsDirected(const Graph& g) {
  if (g.directed()) return g;
  std::vector<Edge> arcs;
  arcs.reserve(2 * g.edge_count());
  for (const auto& [a, b] : g.edges()) {
    arcs.emplace_back(a, b);
    arcs.emplace_back(b, a);
  }
  return Graph(g.size(), Directedness::kDirected, std::move(arcs));
}

Graph BidirectionalCore(const Graph& g) {
  if (!g.directed()) return g;
  std::vector<Edge> edges;
  for (const auto& [a, b] : g.edges()) {
    if (a < b && g.HasArc(b, a)) edges.emplace_back(a, b);
  }
  return Graph(g.size(), Directedness::kUndirected, std::move(edges));
}

Graph UnionOf(std::span<const Graph> graphs) {
  if (graphs.empty()) throw ContractViolation("UnionOf needs at least one graph");
  const int n = graphs.front().size();
  bool any_directed = false;
  for (const auto& g : graphs) {
    if (g.size() != n) throw ContractViolation("UnionOf: vertex counts differ");
    any_directed = any_directed || g.directed();
  }
  std::vector<Edge> edges;
  for (const auto& g : graphs) {
    const Graph& src = any_directed ? AsDirected(g) : g;
    edges.insert(edges.end(), src.edges().begin(), src.edges().end());
  }
  return Graph(n, any_directed ? Directedness::kDirected : Directedness::kUndirected,
               std::move(edges));
}

std::string_view ToString(DropModel model) {
  switch (model) {
    case DropModel::kStatic:
      return "static";
    case DropModel::kUndirectedDrop:
      return "undirected-drop";
    case DropModel::kDirectedDrop:
      return "directed-drop";
  }
  return "static";
}

DropModel ParseDropModel(std::string_view text) {
  if (text == "static") return DropModel::kStatic;
  if (text == "undirected-drop") return DropModel::kUndirectedDrop;
  if (text == "directed-drop") return DropModel::kDirectedDrop;
  throw ConfigError("unknown topology model '" + std::string(text) +
                    "' (expected static, undirected-drop or directed-drop)");
}

Graph TopologySequence::Sample(std::int64_t k) const { return SampleTopology(*this, k); }

Graph SampleTopology(const TopologySequence& seq, std::int64_t k) {
  if (k < 0) throw ContractViolation("iteration index must be non-negative");
  if (seq.model == DropModel::kStatic || seq.drop_probability <= 0.0) return seq.base;

  const auto kk = static_cast<std::uint64_t>(k);
  const double p = seq.drop_probability;
  const auto& edges = seq.base.edges();
  std::vector<Edge> kept;
  kept.reserve(2 * edges.size());

  if (seq.model == DropModel::kUndirectedDrop) {
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (ToUnit(CounterHash(seq.seed, kk, e, 0)) >= p) kept.push_back(edges[e]);
    }
    return Graph(seq.base.size(), seq.base.directedness(), std::move(kept));
  }

  // Directed drop: each direction of each edge survives independently.
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [a, b] = edges[e];
    if (ToUnit(CounterHash(seq.seed, kk, e, 1)) >= p) kept.emplace_back(a, b);
    if (!seq.base.directed() && ToUnit(CounterHash(seq.seed, kk, e, 2)) >= p) {
      kept.emplace_back(b, a);
    }
  }
  return Graph(seq.base.size(), Directedness::kDirected, std::move(kept));
}

bool IsBConnected(const std::function<Graph(std::int64_t)>& sampler, std::int64_t k0, int window) {
  if (window < 1) throw ContractViolation("connectivity window B must be >= 1");
  std::vector<Graph> snapshots;
  snapshots.reserve(window);
  for (int b = 0; b < window; ++b) snapshots.push_back(sampler(k0 + b));
  Graph u = UnionOf(snapshots);
  return u.directed() ? IsStronglyConnected(u) : IsConnected(u);
}

bool IsBConnected(const TopologySequence& seq, std::int64_t k0, int window) {
  return IsBConnected([&seq](std::int64_t k) { return SampleTopology(seq, k); }, k0, window);
}

GeometricGraph GenerateGeometric(const GeometricGraphSpec& spec) {
  if (spec.n_vertices <= 0) throw ContractViolation("geometric graph needs n > 0");
  if (!(spec.radius > 0.0)) throw ContractViolation("geometric graph radius must be > 0");
  GeometricGraph out;
  out.seed = spec.seed;
  out.positions.resize(spec.n_vertices);
  for (int i = 0; i < spec.n_vertices; ++i) {
    out.positions[i] = {ToUnit(CounterHash(spec.seed, 0x9e0, i, 0)),
                        ToUnit(CounterHash(spec.seed, 0x9e0, i, 1))};
  }
  std::vector<Edge> edges;
  for (int i = 0; i < spec.n_vertices; ++i) {
    for (int j = i + 1; j < spec.n_vertices; ++j) {
      const double dx = out.positions[i][0] - out.positions[j][0];
      const double dy = out.positions[i][1] - out.positions[j][1];
      if (std::sqrt(dx * dx + dy * dy) <= spec.radius) edges.emplace_back(i, j);
    }
  }
  out.graph = Graph(spec.n_vertices, Directedness::kUndirected, std::move(edges));
  return out;
}

Graph GenerateGeometricGraph(const GeometricGraphSpec& spec) { return GenerateGeometric(spec).graph; }

GeometricGraph GenerateConnectedGeometric(const GeometricGraphSpec& spec, int max_attempts) {
  GeometricGraphSpec s = spec;
  for (int attempt = 0; attempt < max_attempts; ++attempt, ++s.seed) {
    GeometricGraph g = GenerateGeometric(s);
    if (IsConnected(g.graph)) return g;
  }
  throw ConfigError("no connected geometric graph found within " + std::to_string(max_attempts) +
                    " seeds (radius " + std::to_string(spec.radius) + " too small?)");
}

}  // namespace distopt
