#include <doctest.h>

#include <cmath>
#include <set>

#include "distopt/error.hpp"
#include "distopt/graph.hpp"

using namespace distopt;

namespace {

Graph Undirected(int n, std::vector<Edge> e) { return Graph(n, Directedness::kUndirected, std::move(e)); }
Graph Directed(int n, std::vector<Edge> e) { return Graph(n, Directedness::kDirected, std::move(e)); }

}  // namespace

TEST_CASE("connectivity of small undirected graphs") {
  CHECK(IsConnected(Undirected(3, {{0, 1}, {1, 2}})));
  CHECK_FALSE(IsConnected(Undirected(4, {{0, 1}, {2, 3}})));
  CHECK(IsConnected(Undirected(1, {})));
}

TEST_CASE("strong and weak connectivity") {
  CHECK(IsStronglyConnected(Directed(3, {{0, 1}, {1, 2}, {2, 0}})));
  const Graph chain = Directed(3, {{0, 1}, {1, 2}});
  CHECK_FALSE(IsStronglyConnected(chain));
  CHECK(IsWeaklyConnected(chain));
  CHECK_FALSE(IsWeaklyConnected(Directed(3, {{0, 1}})));
}

TEST_CASE("graph construction rejects bad edges") {
  CHECK_THROWS_AS(Undirected(3, {{0, 0}}), ContractViolation);
  CHECK_THROWS_AS(Undirected(3, {{0, 3}}), ContractViolation);
  CHECK_THROWS_AS(Undirected(3, {{-1, 2}}), ContractViolation);
}

TEST_CASE("undirected neighbor sets are symmetric and sorted") {
  const Graph g = GenerateGeometricGraph({20, 0.45, 11});
  for (int i = 0; i < g.size(); ++i) {
    auto n = g.Neighbors(i);
    CHECK(std::is_sorted(n.begin(), n.end()));
    for (int j : n) {
      CHECK(j != i);
      CHECK(g.HasArc(i, j));
      CHECK(g.HasArc(j, i));
    }
  }
}

TEST_CASE("edge list is canonical") {
  const Graph a = Undirected(3, {{2, 1}, {0, 1}, {1, 0}});
  REQUIRE(a.edge_count() == 2);
  CHECK(a.edges()[0] == Edge{0, 1});
  CHECK(a.edges()[1] == Edge{1, 2});
  CHECK(a == Undirected(3, {{0, 1}, {1, 2}}));
  CHECK(a.Fingerprint() == Undirected(3, {{1, 2}, {0, 1}}).Fingerprint());
  CHECK(a.Fingerprint() != Undirected(3, {{0, 1}}).Fingerprint());
}

TEST_CASE("text form round-trips") {
  for (const Graph& g : {Graph::Ring(5), Directed(4, {{0, 1}, {3, 2}, {2, 0}}), Graph::Empty(2)}) {
    CHECK(Graph::Parse(g.Serialize()) == g);
  }
  CHECK_THROWS(Graph::Parse("n 3 sideways\n"));
}

TEST_CASE("named families") {
  CHECK(Graph::Complete(5).edge_count() == 10);
  CHECK(Graph::Path(5).edge_count() == 4);
  CHECK(Graph::Ring(5).edge_count() == 5);
  CHECK(IsConnected(Graph::Ring(6)));
}

TEST_CASE("topology sampling") {
  const Graph base = Graph::Complete(6);
  SUBCASE("static returns the base") {
    const TopologySequence s{base, DropModel::kStatic, 0.7, 3, 1};
    for (int k = 0; k < 5; ++k) CHECK(s.Sample(k) == base);
  }
  SUBCASE("zero probability returns the base") {
    for (auto m : {DropModel::kUndirectedDrop, DropModel::kDirectedDrop}) {
      const TopologySequence s{base, m, 0.0, 3, 1};
      CHECK(s.Sample(17) == base);
    }
  }
  SUBCASE("certain drop empties the graph") {
    const TopologySequence s{base, DropModel::kUndirectedDrop, 1.0, 3, 1};
    CHECK(s.Sample(4).edge_count() == 0);
  }
  SUBCASE("pure in (seed, k)") {
    const TopologySequence s{base, DropModel::kDirectedDrop, 0.3, 9, 1};
    CHECK(s.Sample(5) == s.Sample(5));
    CHECK(s.Sample(5) == SampleTopology(s, 5));
    bool differs = false;
    for (int k = 0; k < 10; ++k) differs = differs || !(s.Sample(k) == s.Sample(k + 1));
    CHECK(differs);
  }
  SUBCASE("undirected drop keeps an undirected subgraph") {
    const TopologySequence s{base, DropModel::kUndirectedDrop, 0.4, 2, 1};
    for (int k = 0; k < 20; ++k) {
      const Graph g = s.Sample(k);
      CHECK_FALSE(g.directed());
      for (auto [i, j] : g.edges()) CHECK(base.HasArc(i, j));
    }
  }
  SUBCASE("directed drop can leave one-way links") {
    const TopologySequence s{base, DropModel::kDirectedDrop, 0.4, 2, 1};
    bool one_way = false;
    for (int k = 0; k < 20; ++k) {
      const Graph g = s.Sample(k);
      CHECK(g.directed());
      for (auto [i, j] : g.edges()) {
        CHECK(base.HasArc(i, j));
        one_way = one_way || !g.HasArc(j, i);
      }
    }
    CHECK(one_way);
  }
}

TEST_CASE("drop frequency matches the probability") {
  const Graph base = Graph::Complete(20);
  const TopologySequence s{base, DropModel::kUndirectedDrop, 0.2, 5, 1};
  std::size_t kept = 0, total = 0;
  for (int k = 0; k < 200; ++k) {
    kept += s.Sample(k).edge_count();
    total += base.edge_count();
  }
  CHECK(static_cast<double>(kept) / total == doctest::Approx(0.8).epsilon(0.02));
}

TEST_CASE("B-connectivity") {
  const Graph a = Undirected(3, {{0, 1}});
  const Graph b = Undirected(3, {{1, 2}});
  auto alt = [&](std::int64_t k) { return k % 2 == 0 ? a : b; };
  CHECK(IsBConnected(alt, 0, 2));
  CHECK_FALSE(IsBConnected(alt, 0, 1));
  CHECK(IsBConnected(TopologySequence{Graph::Path(4), DropModel::kStatic, 0.0, 0, 1}, 0, 1));
}

TEST_CASE("geometric graphs") {
  CHECK(GenerateGeometricGraph({7, 1.4142135623730951, 1}).edge_count() == 21);
  CHECK(GenerateGeometricGraph({7, 1e-9, 1}).edge_count() == 0);
  const GeometricGraph g = GenerateGeometric({12, 0.4, 8});
  for (int i = 0; i < 12; ++i) {
    for (int j = i + 1; j < 12; ++j) {
      const double dx = g.positions[i][0] - g.positions[j][0];
      const double dy = g.positions[i][1] - g.positions[j][1];
      CHECK(g.graph.HasArc(i, j) == (std::sqrt(dx * dx + dy * dy) <= 0.4));
    }
  }
  CHECK(GenerateGeometricGraph({12, 0.4, 8}) == g.graph);
}

TEST_CASE("calibrated radius connects most 20-robot samples") {
  int connected = 0;
  for (std::uint64_t s = 1; s <= 50; ++s) {
    connected += IsConnected(GenerateGeometricGraph({20, kGeometricRadiusN20, s}));
  }
  CHECK(connected >= 45);
}

TEST_CASE("connected resampling") {
  const GeometricGraph g = GenerateConnectedGeometric({20, 0.3, 4});
  CHECK(IsConnected(g.graph));
  CHECK(g.seed >= 4);
}

TEST_CASE("graph helpers") {
  const Graph d = Directed(3, {{0, 1}, {1, 0}, {1, 2}});
  const Graph core = BidirectionalCore(d);
  CHECK_FALSE(core.directed());
  CHECK(core.edge_count() == 1);
  CHECK(AsDirected(Graph::Path(3)).edge_count() == 4);
  const Graph parts[] = {Undirected(3, {{0, 1}}), Undirected(3, {{1, 2}})};
  CHECK(UnionOf(parts) == Graph::Path(3));
  CHECK(ParseDropModel(ToString(DropModel::kDirectedDrop)) == DropModel::kDirectedDrop);
}
