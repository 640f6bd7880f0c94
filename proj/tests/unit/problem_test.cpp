#include <doctest.h>

#include <random>

#include "distopt/error.hpp"
#include "distopt/problem.hpp"

using namespace distopt;

namespace {

Vector RandomVector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (int k = 0; k < n; ++k) v[k] = d(rng);
  return v;
}

// Global MAP cost written out term by term, inverting covariances densely.
double DirectTrackingCost(const TargetTrackingSpec& s, const Vector& x) {
  auto w = [](const Vector& r, const Matrix& cov) { return (r.transpose() * cov.inverse() * r)(0, 0); };
  double f = w(x.head(4) - s.x0_bar, s.P0_bar);
  for (int t = 0; t + 1 < s.T; ++t) f += w(x.segment(4 * t + 4, 4) - s.A_t[t] * x.segment(4 * t, 4), s.Q_t[t]);
  for (int i = 0; i < s.N; ++i) {
    for (std::size_t k = 0; k < s.T_i[i].size(); ++k) {
      const int t = s.T_i[i][k];
      f += w(s.y_it[i][k] - s.C_it[i][t] * x.segment(4 * t, 4), s.R_it[i][t]);
    }
  }
  return f;
}

// Least squares via QR on the stacked, row-scaled system.
Vector QrSolve(const FactoredLeastSquaresSpec& s) {
  int rows = 0;
  for (const auto& b : s.blocks) rows += b.rows();
  Matrix A(rows, s.n);
  Vector z(rows);
  int at = 0;
  for (const auto& b : s.blocks) {
    for (int r = 0; r < b.rows(); ++r) {
      const double sw = std::sqrt(b.M_diag[r]);
      A.row(at) = sw * b.G.row(r);
      z[at++] = sw * b.z[r];
    }
  }
  return A.colPivHouseholderQr().solve(z);
}

}  // namespace

TEST_CASE("quadratic cost gradient and value") {
  QuadraticLocalCost c{2.0 * Matrix::Identity(3, 3), Vector::Zero(3), 0.0};
  CHECK(c.Gradient(Vector::Ones(3)).isApprox(2.0 * Vector::Ones(3)));
  CHECK(c.Evaluate(Vector::Ones(3)) == doctest::Approx(3.0));
}

TEST_CASE("gradients match central finite differences") {
  const SeparableProblem p = BuildTargetTracking(SimulateTargetData(MakeTrackingSpec(4, 5, 3)));
  std::mt19937_64 rng(5);
  const double h = 1e-5;
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x = RandomVector(p.dimension(), rng);
    for (int i = 0; i < p.robot_count(); ++i) {
      const Vector g = p.Gradient(i, x);
      Vector fd(p.dimension());
      for (int k = 0; k < p.dimension(); ++k) {
        Vector a = x, b = x;
        a[k] += h;
        b[k] -= h;
        fd[k] = (p.LocalCost(i, a) - p.LocalCost(i, b)) / (2 * h);
      }
      CHECK((fd - g).norm() <= 1e-6 * std::max(1.0, g.norm()));
    }
  }
}

TEST_CASE("tracking problem sums to the global cost") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const TargetTrackingSpec s = SimulateTargetData(MakeTrackingSpec(5, 8, seed));
    const SeparableProblem p = BuildTargetTracking(s);
    std::mt19937_64 rng(seed);
    for (int k = 0; k < 10; ++k) {
      const Vector x = RandomVector(p.dimension(), rng, 2.0);
      const double direct = DirectTrackingCost(s, x);
      CHECK(std::abs(p.JointCost(x) - direct) <= 1e-9 * std::max(1.0, std::abs(direct)));
      CHECK(std::abs(TrackingGlobalCost(s, x) - direct) <= 1e-9 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST_CASE("tracking dimensions") {
  const TargetTrackingSpec s = MakeTrackingSpec(10, 16, 1);
  CHECK(s.dimension() == 64);
  const SeparableProblem p = BuildTargetTracking(SimulateTargetData(s));
  CHECK(p.dimension() == 64);
  CHECK(p.robot_count() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK((p.Hessian(i) - p.Hessian(i).transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("tracking data is deterministic in the seed") {
  const auto a = SimulateTargetData(MakeTrackingSpec(3, 6, 42));
  const auto b = SimulateTargetData(MakeTrackingSpec(3, 6, 42));
  const auto c = SimulateTargetData(MakeTrackingSpec(3, 6, 43));
  CHECK(a.T_i == b.T_i);
  bool same = true, diff = false;
  for (int i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < a.y_it[i].size(); ++k) {
      same = same && a.y_it[i][k] == b.y_it[i][k];
      diff = diff || a.y_it[i][k] != c.y_it[i][k];
    }
  }
  CHECK(same);
  CHECK(diff);
  CHECK(BuildTargetTracking(a).Fingerprint() == BuildTargetTracking(b).Fingerprint());
}

TEST_CASE("noiseless tracking measurements match the model") {
  TrackingDefaults d;
  // The true trajectory is not exposed, so keep its drift from the rollout negligible.
  d.process_noise = 1e-16;
  d.prior_covariance = 1e-16;
  d.measurement_noise = 1e-12;
  d.window = 6;
  const auto s = SimulateTargetData(MakeTrackingSpec(2, 6, 3, d));
  const Vector rollout = NominalRollout(s);
  for (int i = 0; i < 2; ++i) {
    REQUIRE(s.T_i[i].size() == 6u);
    for (std::size_t k = 0; k < 6; ++k) {
      const int t = s.T_i[i][k];
      CHECK((s.y_it[i][k] - s.C_it[i][t] * rollout.segment(4 * t, 4)).norm() <= 1e-5);
    }
  }
}

TEST_CASE("prior-only tracking recovers the rollout") {
  auto s = MakeTrackingSpec(1, 1, 1);
  s.T_i.assign(1, {});
  s.y_it.assign(1, {});
  CHECK(OracleSolve(BuildTargetTracking(s)).isApprox(s.x0_bar, 1e-12));

  auto m = MakeTrackingSpec(3, 7, 1);
  m.T_i.assign(3, {});
  m.y_it.assign(3, {});
  const Vector x = OracleSolve(BuildTargetTracking(m));
  Vector expect(28);
  expect.head(4) = m.x0_bar;
  for (int t = 0; t < 6; ++t) expect.segment(4 * t + 4, 4) = m.A_t[t] * expect.segment(4 * t, 4);
  CHECK((x - expect).norm() <= 1e-9 * expect.norm());
  CHECK((NominalRollout(m) - expect).norm() <= 1e-12);
}

TEST_CASE("factored least squares") {
  SUBCASE("identity single robot returns z") {
    FactoredLeastSquaresSpec s;
    s.N = 1;
    s.n = 3;
    FactoredBlock b;
    b.G = Matrix::Identity(3, 3);
    b.M = Matrix::Identity(3, 3);
    b.z = Vector::LinSpaced(3, 1.0, 3.0);
    s.blocks.push_back(b);
    CHECK(OracleSolve(BuildFactoredLs(s)).isApprox(b.z, 1e-12));
  }
  SUBCASE("oracle matches QR") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto s = GenerateFactoredLs(8, {20, 31, 17, 40}, seed);
      const Vector x = OracleSolve(BuildFactoredLs(s));
      const Vector q = QrSolve(s);
      CHECK((x - q).norm() <= 1e-8 * std::max(1.0, q.norm()));
    }
  }
  SUBCASE("local costs sum to the global cost") {
    const auto s = GenerateFactoredLs(5, {9, 12}, 3);
    const SeparableProblem p = BuildFactoredLs(s);
    std::mt19937_64 rng(1);
    for (int k = 0; k < 10; ++k) {
      const Vector x = RandomVector(5, rng);
      CHECK(p.JointCost(x) == doctest::Approx(FactoredGlobalCost(s, x)).epsilon(1e-12));
    }
  }
  SUBCASE("hardware-scale dimensions are accepted") {
    const auto s = GenerateFactoredLs(32, {3268, 5422, 3528}, 1);
    const SeparableProblem p = BuildFactoredLs(s);
    CHECK(p.robot_count() == 3);
    CHECK(p.dimension() == 32);
    CHECK(OracleSolve(p).allFinite());
  }
}

TEST_CASE("oracle of scalar consensus is the mean") {
  CHECK(OracleSolve(ScalarConsensusProblem({0, 3, 6}))[0] == doctest::Approx(3.0));
}

TEST_CASE("oracle is stationary") {
  const SeparableProblem p = BuildTargetTracking(SimulateTargetData(MakeTrackingSpec(6, 10, 9)));
  const Vector x = OracleSolve(p);
  Vector g = Vector::Zero(p.dimension());
  for (int i = 0; i < p.robot_count(); ++i) g += p.Gradient(i, x);
  CHECK(g.norm() <= 1e-8);
}

TEST_CASE("singular joint problem is reported") {
  std::vector<QuadraticLocalCost> c{{Matrix::Zero(2, 2), Vector::Zero(2), 0.0}};
  CHECK_THROWS_AS(OracleSolve(SeparableProblem(c)), NumericError);
}

TEST_CASE("local prox") {
  const SeparableProblem s = ScalarConsensusProblem({0.0, 4.0});
  CHECK(s.LocalProx(1, Vector::Zero(1), 0.0, Vector::Zero(1))[0] == doctest::Approx(4.0));

  const SeparableProblem p = BuildTargetTracking(SimulateTargetData(MakeTrackingSpec(3, 4, 2)));
  CHECK(p.LocalProx(0, Vector::Zero(16), 0.0, Vector::Zero(16))
            .isApprox(p.Hessian(0).ldlt().solve(-p.cost(0).linear), 1e-9));

  std::mt19937_64 rng(3);
  const Vector lin = RandomVector(16, rng), anchor = RandomVector(16, rng);
  const double scale = 0.7;
  const Vector x = p.LocalProx(1, lin, scale, anchor);
  const Vector foc = p.Gradient(1, x) + lin + 2.0 * scale * (x - anchor);
  CHECK(foc.norm() <= 1e-10 * std::max(1.0, lin.norm()));
}

TEST_CASE("consensus lifting") {
  const SeparableProblem p = ScalarConsensusProblem({1, 2, 3});
  const auto path = LiftToConsensus(p, Graph::Path(3));
  CHECK(path == std::vector<ConsensusConstraint>{{0, 1}, {1, 2}});
  CHECK(LiftToConsensus(p, Graph::Complete(3)).size() == 3);
  CHECK_THROWS(LiftToConsensus(p, Graph(3, Directedness::kUndirected, {{0, 1}})));
  CHECK_THROWS(LiftToConsensus(p, Graph::Path(4)));
}
