#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace distopt {

enum class Directedness { kUndirected, kDirected };

// (from, to). Undirected edges are stored once with from < to.
using Edge = std::pair<int, int>;

/// Immutable communication graph on vertices 0..n-1.
///
/// Neighbor lists are kept sorted so every traversal visits vertices in
/// ascending index order. For undirected graphs in- and out-neighbors coincide.
class Graph {
 public:
  Graph() = default;
  Graph(int n_vertices, Directedness directedness, std::vector<Edge> edges);

  static Graph Empty(int n, Directedness directedness = Directedness::kUndirected);
  static Graph Complete(int n);
  static Graph Path(int n);
  static Graph Ring(int n);

  int size() const { return n_; }
  bool directed() const { return directedness_ == Directedness::kDirected; }
  Directedness directedness() const { return directedness_; }

  // Canonical edge list: sorted, de-duplicated.
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }

  // True iff a message can travel from -> to.
  bool HasArc(int from, int to) const;

  // Vertices j with an arc j -> i.
  std::span<const int> InNeighbors(int i) const { return in_[i]; }
  // Vertices j with an arc i -> j.
  std::span<const int> OutNeighbors(int i) const { return out_[i]; }
  // Undirected neighbor set N_i; for directed graphs this is the in-neighbor set.
  std::span<const int> Neighbors(int i) const { return in_[i]; }

  std::uint64_t Fingerprint() const;

  // Text form: "n <count> <directed|undirected>" followed by one "i j" per line.
  std::string Serialize() const;
  static Graph Parse(std::string_view text);

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n_ == b.n_ && a.directedness_ == b.directedness_ && a.edges_ == b.edges_;
  }

 private:
  int n_ = 0;
  Directedness directedness_ = Directedness::kUndirected;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> in_;
  std::vector<std::vector<int>> out_;
};

bool IsConnected(const Graph& g);
bool IsStronglyConnected(const Graph& g);
bool IsWeaklyConnected(const Graph& g);

// Directed graph containing every arc of g, undirected input yields both directions.
Graph AsDirected(const Graph& g);
// Undirected graph made of the arcs present in both directions.
Graph BidirectionalCore(const Graph& g);
// Union of arc sets; result is undirected only if all inputs are.
Graph UnionOf(std::span<const Graph> graphs);

enum class DropModel { kStatic, kUndirectedDrop, kDirectedDrop };

std::string_view ToString(DropModel model);
DropModel ParseDropModel(std::string_view text);

/// Time-varying topology: base graph plus a per-iteration edge-drop model.
struct TopologySequence {
  Graph base;
  DropModel model = DropModel::kStatic;
  double drop_probability = 0.0;
  std::uint64_t seed = 0;
  int window_b = 1;

  // Pure in (base, model, drop_probability, seed, k).
  Graph Sample(std::int64_t k) const;
};

Graph SampleTopology(const TopologySequence& seq, std::int64_t k);

bool IsBConnected(const std::function<Graph(std::int64_t)>& sampler, std::int64_t k0, int window);
bool IsBConnected(const TopologySequence& seq, std::int64_t k0, int window);

struct GeometricGraphSpec {
  int n_vertices = 0;
  double radius = 0.0;
  std::uint64_t seed = 0;
};

struct GeometricGraph {
  Graph graph;
  std::vector<std::array<double, 2>> positions;
  std::uint64_t seed = 0;  // seed that produced this sample
};

// Uniform points in the unit square, edge iff distance <= radius.
GeometricGraph GenerateGeometric(const GeometricGraphSpec& spec);
Graph GenerateGeometricGraph(const GeometricGraphSpec& spec);

// Resamples with seed, seed+1, ... until the graph is connected.
GeometricGraph GenerateConnectedGeometric(const GeometricGraphSpec& spec, int max_attempts = 1000);

// Radius giving >= 90% connected samples for n = 20 over 50 seeds.
inline constexpr double kGeometricRadiusN20 = 0.45;

}  // namespace distopt
