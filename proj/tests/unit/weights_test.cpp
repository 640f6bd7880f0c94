#include <doctest.h>

#include <Eigen/SVD>

#include "distopt/error.hpp"
#include "distopt/weights.hpp"

using namespace distopt;

namespace {

Graph Undirected(int n, std::vector<Edge> e) { return Graph(n, Directedness::kUndirected, std::move(e)); }

// Entrywise oracle for 1/max(deg_i, deg_j).
double MetropolisEntry(const Graph& g, int i, int j) {
  if (i != j) {
    if (!g.HasArc(j, i)) return 0.0;
    return 1.0 / std::max(g.Neighbors(i).size(), g.Neighbors(j).size());
  }
  double s = 0.0;
  for (int k : g.Neighbors(i)) s += MetropolisEntry(g, i, k);
  return 1.0 - s;
}

}  // namespace

TEST_CASE("Metropolis on hand-evaluated graphs") {
  const WeightMatrix two = Metropolis(Undirected(2, {{0, 1}}));
  CHECK(two(0, 0) == 0.0);
  CHECK(two(0, 1) == 1.0);
  CHECK(two(1, 0) == 1.0);

  const WeightMatrix path = Metropolis(Graph::Path(3));
  CHECK(path(0, 1) == 0.5);
  CHECK(path(1, 2) == 0.5);
  CHECK(path(0, 0) == 0.5);
  CHECK(path(2, 2) == 0.5);
  CHECK(path(1, 1) == 0.0);

  const WeightMatrix k4 = Metropolis(Graph::Complete(4));
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(k4(i, j) == doctest::Approx(i == j ? 0.0 : 1.0 / 3.0));
  }
}

TEST_CASE("Metropolis is symmetric and doubly stochastic on random graphs") {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const Graph g = GenerateGeometricGraph({15, 0.4, s});
    const WeightMatrix w = Metropolis(g);
    CHECK(w.kind == StochasticKind::kDoubly);
    CHECK(Validate(w, g).empty());
    CHECK((w.values - w.values.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    for (int i = 0; i < 15; ++i) {
      CHECK(std::abs(w.values.row(i).sum() - 1.0) <= 1e-12);
      CHECK(std::abs(w.values.col(i).sum() - 1.0) <= 1e-12);
      for (int j = 0; j < 15; ++j) CHECK(w(i, j) == doctest::Approx(MetropolisEntry(g, i, j)).epsilon(1e-14));
    }
  }
}

namespace {

double SecondSingularValue(const WeightMatrix& w) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w.values);
  return svd.singularValues()(1);
}

}  // namespace

TEST_CASE("Metropolis mixes on connected random graphs") {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const GeometricGraph gg = GenerateConnectedGeometric({12, 0.5, s});
    CHECK(SecondSingularValue(Metropolis(gg.graph)) < 1.0 - 1e-9);
  }
  CHECK(SecondSingularValue(Metropolis(Graph::Path(5))) < 1.0 - 1e-9);
  // Regular bipartite graphs get a zero diagonal and an eigenvalue of -1.
  CHECK(SecondSingularValue(Metropolis(Graph::Ring(4))) == doctest::Approx(1.0));
}

TEST_CASE("Metropolis requires an undirected graph") {
  CHECK_THROWS_AS(Metropolis(Graph(2, Directedness::kDirected, {{0, 1}})), ContractViolation);
}

TEST_CASE("uniform row and column weights") {
  const WeightMatrix single = UniformRowStochastic(Graph::Empty(1));
  CHECK(single(0, 0) == 1.0);

  const Graph chain(2, Directedness::kDirected, {{0, 1}});
  const WeightMatrix r = UniformRowStochastic(chain);
  CHECK(r.kind == StochasticKind::kRow);
  CHECK(r(0, 0) == 1.0);
  CHECK(r(0, 1) == 0.0);
  CHECK(r(1, 0) == 0.5);
  CHECK(r(1, 1) == 0.5);

  const Graph cycle(3, Directedness::kDirected, {{0, 1}, {1, 2}, {2, 0}});
  const WeightMatrix rc = UniformRowStochastic(cycle);
  for (int i = 0; i < 3; ++i) {
    int halves = 0;
    for (int j = 0; j < 3; ++j) halves += rc(i, j) == 0.5;
    CHECK(halves == 2);
  }
  CHECK(Validate(rc, cycle).empty());

  const WeightMatrix c = UniformColumnStochastic(chain);
  CHECK(c.kind == StochasticKind::kColumn);
  CHECK(c.values.col(0).sum() == doctest::Approx(1.0));
  CHECK(c.values.col(1).sum() == doctest::Approx(1.0));
  CHECK(Validate(c, chain).empty());
}

TEST_CASE("validation reports each violation") {
  const WeightMatrix w = Metropolis(Graph::Path(3));
  CHECK(Validate(w, Graph::Path(3)).empty());

  const auto v = Validate(w, Graph::Empty(3));
  std::vector<std::pair<int, int>> sparsity;
  for (const auto& x : v) {
    if (x.kind == WeightViolation::Kind::kSparsity) sparsity.emplace_back(x.row, x.col);
  }
  CHECK(sparsity == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}, {1, 2}, {2, 1}});

  WeightMatrix bad;
  bad.kind = StochasticKind::kRow;
  bad.values = Eigen::MatrixXd::Identity(2, 2);
  bad.values(0, 0) = 0.9;
  const auto rs = Validate(bad, Graph::Empty(2));
  REQUIRE(rs.size() == 1);
  CHECK(rs[0].kind == WeightViolation::Kind::kRowSum);
  CHECK_FALSE(rs[0].Describe().empty());

  bad.values(0, 0) = -0.1;
  bad.values(0, 1) = 1.1;
  const auto neg = Validate(bad, Graph::Complete(2));
  CHECK(std::any_of(neg.begin(), neg.end(), [](const WeightViolation& x) {
    return x.kind == WeightViolation::Kind::kNegative;
  }));
}

TEST_CASE("weights are tied to the graph they were built on") {
  const WeightMatrix w = Metropolis(Graph::Path(3));
  CHECK_NOTHROW(RequireCompatible(w, Graph::Path(3)));
  CHECK_THROWS(RequireCompatible(w, Graph::Complete(3)));
}
