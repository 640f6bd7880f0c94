#include <doctest.h>

#include <random>

#include "distopt/algorithms.hpp"
#include "distopt/error.hpp"

using namespace distopt;

namespace {

Vector Scalar(double v) { return Vector::Constant(1, v); }

// Messages from robot i's in-neighbors, ascending.
std::vector<const OutboundMessage*> InboxFor(const Graph& g, int i, const std::vector<OutboundMessage>& out) {
  std::vector<const OutboundMessage*> in;
  for (int j : g.InNeighbors(i)) in.push_back(&out[j]);
  return in;
}

SeparableProblem RandomQuadratics(int n_robots, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<QuadraticLocalCost> costs;
  for (int i = 0; i < n_robots; ++i) {
    Matrix a(dim + 2, dim);
    for (int r = 0; r < a.rows(); ++r)
      for (int c = 0; c < dim; ++c) a(r, c) = d(rng);
    Vector r(dim);
    for (int k = 0; k < dim; ++k) r[k] = d(rng);
    costs.push_back({a.transpose() * a, r, 0.0});
  }
  return SeparableProblem(std::move(costs));
}

}  // namespace

TEST_CASE("step schedules") {
  CHECK(StepSchedule::Constant(0.1)(999) == 0.1);
  const auto inv = StepSchedule::Make(ScheduleKind::kInverse, 1.0);
  CHECK(inv(0) == 1.0);
  CHECK(inv(9) == doctest::Approx(0.1));
  CHECK(StepSchedule::Make(ScheduleKind::kInverseSqrt, 1.0)(3) == doctest::Approx(0.5));
  CHECK_THROWS_AS(StepSchedule::Make(ScheduleKind::kInverse, 0.0), ContractViolation);
  CHECK_THROWS_AS(StepSchedule::Make(ScheduleKind::kConstant, -1.0), ContractViolation);
  CHECK(ParseSchedule(ToString(ScheduleKind::kInverseSqrt)) == ScheduleKind::kInverseSqrt);
  CHECK_THROWS_AS(ParseSchedule("linear"), ConfigError);
}

TEST_CASE("diminishing schedules: partial sums grow, squares stay bounded") {
  const auto inv = StepSchedule::Make(ScheduleKind::kInverse, 1.0);
  const auto sq = StepSchedule::Make(ScheduleKind::kInverseSqrt, 1.0);
  double s1 = 0, s1sq = 0, s2sq = 0;
  for (int k = 0; k < 100000; ++k) {
    s1 += inv(k);
    s1sq += inv(k) * inv(k);
    s2sq += sq(k) * sq(k);
  }
  CHECK(s1 > 12.0);
  CHECK(s1sq < 1.645);
  CHECK(s2sq > 12.0);
}

TEST_CASE("algorithm names") {
  for (auto k : {AlgorithmKind::kDgdCta, AlgorithmKind::kDgdAtc, AlgorithmKind::kDiging,
                 AlgorithmKind::kNextQ, AlgorithmKind::kCadmm}) {
    CHECK(ParseAlgorithm(ToString(k)) == k);
  }
  CHECK_THROWS_AS(ParseAlgorithm("extra"), ConfigError);
  CHECK(PayloadVectors(AlgorithmKind::kDiging) == 2);
  CHECK(PayloadVectors(AlgorithmKind::kCadmm) == 1);
}

TEST_CASE("initialization") {
  const SeparableProblem p = ScalarConsensusProblem({1.0, 2.0, 4.0});
  const RobotState d = InitState(AlgorithmKind::kDiging, p, 1, Scalar(0.0));
  CHECK(d.y[0] == -4.0);
  const RobotState n = InitState(AlgorithmKind::kNextQ, p, 1, Scalar(0.0));
  CHECK(n.pi[0] == doctest::Approx(3 * -4.0 - -4.0));
  const RobotState c = InitState(AlgorithmKind::kCadmm, p, 1, Scalar(5.0));
  CHECK(c.y[0] == 0.0);
}

TEST_CASE("single-robot steps") {
  const SeparableProblem f = ScalarConsensusProblem({0.0});  // f = x^2
  const Graph g = Graph::Empty(1);
  const WeightMatrix w = Metropolis(g);
  const Inbox none{};

  SUBCASE("DGD CTA and ATC") {
    const RobotState s = InitState(AlgorithmKind::kDgdCta, f, 0, Scalar(1.0));
    const auto sched = StepSchedule::Constant(0.1);
    CHECK(DgdCtaStep(f, 0, s, none, w, sched, 0).x[0] == doctest::Approx(0.8));
    CHECK(DgdAtcStep(f, 0, s, none, w, sched, 0).x[0] == doctest::Approx(0.8));
  }
  SUBCASE("DIGing") {
    const RobotState s = InitState(AlgorithmKind::kDiging, f, 0, Scalar(1.0));
    CHECK(s.y[0] == 2.0);
    const RobotState t = DigingStep(f, 0, s, none, w, 0.1);
    CHECK(t.x[0] == doctest::Approx(0.8));
    CHECK(t.y[0] == doctest::Approx(1.6));
  }
  SUBCASE("NEXT-Q with exact Hessian takes a Newton step") {
    const SeparableProblem q = ScalarConsensusProblem({2.5});
    RobotState s = InitState(AlgorithmKind::kNextQ, q, 0, Scalar(-7.0));
    CHECK(s.pi[0] == 0.0);
    const LocalFactorization h(q.Hessian(0));
    s = NextQPrepare(0, s, h, StepSchedule::Make(ScheduleKind::kInverseSqrt, 1.0), 0);
    s = NextQStep(q, 0, s, none, w);
    CHECK(s.x[0] == doctest::Approx(2.5));
  }
  SUBCASE("C-ADMM isolated robot minimizes locally") {
    const SeparableProblem q = ScalarConsensusProblem({3.0});
    RobotState s = InitState(AlgorithmKind::kCadmm, q, 0, Scalar(10.0));
    s = CadmmPrimalStep(q, 0, s, none, 1.0);
    s = CadmmDualStep(0, s, none, 1.0);
    CHECK(s.x[0] == doctest::Approx(3.0));
    CHECK(s.y[0] == 0.0);
  }
}

TEST_CASE("one DGD step on three robots matches the formulas") {
  const SeparableProblem p = ScalarConsensusProblem({0.0, 3.0, 6.0});
  const Graph g = Graph::Path(3);
  const WeightMatrix w = Metropolis(g);
  const double x0[] = {1.0, -2.0, 5.0};
  const double alpha = 0.1;
  std::vector<RobotState> s;
  std::vector<OutboundMessage> cta, atc;
  const auto sched = StepSchedule::Constant(alpha);
  for (int i = 0; i < 3; ++i) {
    s.push_back(InitState(AlgorithmKind::kDgdCta, p, i, Scalar(x0[i])));
    cta.push_back(DgdMessage(i, s[i]));
    atc.push_back(DgdAtcMessage(i, s[i], sched, 0));
  }
  auto grad = [](int i, double x) { return 2.0 * (x - 3.0 * i); };
  for (int i = 0; i < 3; ++i) {
    double mix = 0.0, adapt = 0.0;
    for (int j = 0; j < 3; ++j) {
      mix += w(i, j) * x0[j];
      adapt += w(i, j) * (x0[j] - alpha * grad(j, x0[j]));
    }
    const auto in_cta = InboxFor(g, i, cta);
    const auto in_atc = InboxFor(g, i, atc);
    const double c = DgdCtaStep(p, i, s[i], in_cta, w, sched, 0).x[0];
    const double a = DgdAtcStep(p, i, s[i], in_atc, w, sched, 0).x[0];
    CHECK(c == doctest::Approx(mix - alpha * grad(i, x0[i])).epsilon(1e-14));
    CHECK(a == doctest::Approx(adapt).epsilon(1e-14));
    if (i != 1) CHECK(c != doctest::Approx(a));
  }
}

TEST_CASE("ATC with zero step is pure averaging") {
  const SeparableProblem p = ScalarConsensusProblem({0.0, 3.0});
  const Graph g = Graph::Path(2);
  const WeightMatrix w = Metropolis(g);
  std::vector<RobotState> s{InitState(AlgorithmKind::kDgdAtc, p, 0, Scalar(1.0)),
                            InitState(AlgorithmKind::kDgdAtc, p, 1, Scalar(2.0))};
  // A tiny step stands in for zero, which schedules reject.
  const auto sched = StepSchedule::Constant(1e-300);
  std::vector<OutboundMessage> out{DgdAtcMessage(0, s[0], sched, 0), DgdAtcMessage(1, s[1], sched, 0)};
  CHECK(DgdAtcStep(p, 0, s[0], InboxFor(g, 0, out), w, sched, 0).x[0] == 2.0);
  CHECK(DgdAtcStep(p, 1, s[1], InboxFor(g, 1, out), w, sched, 0).x[0] == 1.0);
}

TEST_CASE("fixed points at the optimum") {
  const SeparableProblem p = RandomQuadratics(4, 3, 2);
  const Vector xs = OracleSolve(p);
  const Graph g = Graph::Ring(4);
  const WeightMatrix w = Metropolis(g);

  SUBCASE("DIGing with y = 0") {
    std::vector<RobotState> s(4);
    std::vector<OutboundMessage> out;
    for (int i = 0; i < 4; ++i) {
      s[i] = InitState(AlgorithmKind::kDiging, p, i, xs);
      s[i].y = Vector::Zero(3);
      out.push_back(DigingMessage(i, s[i]));
    }
    for (int i = 0; i < 4; ++i) {
      const RobotState t = DigingStep(p, i, s[i], InboxFor(g, i, out), w, 0.05);
      CHECK((t.x - xs).norm() <= 1e-12);
      CHECK(t.y.norm() <= 1e-9);
    }
  }
  SUBCASE("NEXT-Q with y = 0 and pi = -grad") {
    std::vector<RobotState> s(4);
    std::vector<OutboundMessage> out;
    std::vector<LocalFactorization> h;
    for (int i = 0; i < 4; ++i) {
      s[i] = InitState(AlgorithmKind::kNextQ, p, i, xs);
      s[i].y = Vector::Zero(3);
      s[i].pi = -p.Gradient(i, xs);
      h.emplace_back(p.Hessian(i));
      s[i] = NextQPrepare(i, s[i], h[i], StepSchedule::Make(ScheduleKind::kInverseSqrt, 0.5), 0);
      CHECK((s[i].z - xs).norm() <= 1e-10);
      out.push_back(NextQMessage(i, s[i]));
    }
    for (int i = 0; i < 4; ++i) {
      CHECK((NextQStep(p, i, s[i], InboxFor(g, i, out), w).x - xs).norm() <= 1e-10);
    }
  }
  SUBCASE("C-ADMM dual is unchanged at consensus") {
    std::vector<RobotState> s(4);
    std::vector<OutboundMessage> out;
    for (int i = 0; i < 4; ++i) {
      s[i] = InitState(AlgorithmKind::kCadmm, p, i, xs);
      s[i].y = Vector::Constant(3, 0.25);
      s[i].pending_x = xs;
      s[i].neighbor_snapshot.assign(g.InNeighbors(i).begin(), g.InNeighbors(i).end());
      out.push_back(CadmmPendingMessage(i, s[i]));
    }
    for (int i = 0; i < 4; ++i) {
      CHECK(CadmmDualStep(i, s[i], InboxFor(g, i, out), 2.0).y == Vector::Constant(3, 0.25));
    }
  }
}

namespace {

// Runs a gradient-tracking method synchronously and checks sum y = sum grad each round.
void CheckTracking(AlgorithmKind kind, const WeightMatrix& w, const Graph& g) {
  const SeparableProblem p = RandomQuadratics(g.size(), 4, 7);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  std::vector<RobotState> s;
  std::vector<LocalFactorization> h;
  for (int i = 0; i < g.size(); ++i) {
    Vector x0(4);
    for (int k = 0; k < 4; ++k) x0[k] = d(rng);
    s.push_back(InitState(kind, p, i, x0));
    h.emplace_back(p.Hessian(i));
  }
  const auto sched = StepSchedule::Make(ScheduleKind::kInverseSqrt, 0.05);
  for (int k = 0; k < 50; ++k) {
    std::vector<OutboundMessage> out;
    for (int i = 0; i < g.size(); ++i) {
      if (kind == AlgorithmKind::kNextQ) s[i] = NextQPrepare(i, s[i], h[i], sched, k);
      out.push_back(kind == AlgorithmKind::kNextQ ? NextQMessage(i, s[i]) : DigingMessage(i, s[i]));
    }
    std::vector<RobotState> next;
    for (int i = 0; i < g.size(); ++i) {
      const auto in = InboxFor(g, i, out);
      next.push_back(kind == AlgorithmKind::kNextQ ? NextQStep(p, i, s[i], in, w)
                                                    : DigingStep(p, i, s[i], in, w, 0.01));
    }
    s = std::move(next);
    Vector ys = Vector::Zero(4), gs = Vector::Zero(4);
    for (int i = 0; i < g.size(); ++i) {
      ys += s[i].y;
      gs += p.Gradient(i, s[i].x);
    }
    REQUIRE((ys - gs).norm() <= 1e-9 * std::max(1.0, gs.norm()));
  }
}

}  // namespace

TEST_CASE("gradient tracking conserves the gradient sum") {
  const Graph g = GenerateConnectedGeometric({8, 0.5, 3}).graph;
  CheckTracking(AlgorithmKind::kDiging, Metropolis(g), g);
  CheckTracking(AlgorithmKind::kNextQ, Metropolis(g), g);
  const Graph d(4, Directedness::kDirected, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}});
  CheckTracking(AlgorithmKind::kDiging, UniformColumnStochastic(d), d);
}

TEST_CASE("C-ADMM scalar consensus converges to the mean") {
  const SeparableProblem p = ScalarConsensusProblem({0.0, 3.0, 6.0});
  const Graph g = Graph::Complete(3);
  std::vector<RobotState> s;
  for (int i = 0; i < 3; ++i) s.push_back(InitState(AlgorithmKind::kCadmm, p, i, Scalar(0.0)));
  ProxCache cache(p);
  int reached = -1;
  for (int k = 1; k <= 200 && reached < 0; ++k) {
    std::vector<OutboundMessage> out;
    for (int i = 0; i < 3; ++i) out.push_back(CadmmMessage(i, s[i]));
    for (int i = 0; i < 3; ++i) s[i] = CadmmPrimalStep(p, i, s[i], InboxFor(g, i, out), 1.0, &cache);
    out.clear();
    for (int i = 0; i < 3; ++i) out.push_back(CadmmPendingMessage(i, s[i]));
    for (int i = 0; i < 3; ++i) s[i] = CadmmDualStep(i, s[i], InboxFor(g, i, out), 1.0);
    bool all = true;
    for (int i = 0; i < 3; ++i) all = all && std::abs(s[i].x[0] - 3.0) <= 1e-8;
    if (all) reached = k;
  }
  CHECK(reached > 0);
  CHECK(reached <= 200);
}

TEST_CASE("C-ADMM dual round needs the same neighbors as the primal round") {
  const SeparableProblem p = ScalarConsensusProblem({0.0, 3.0, 6.0});
  const Graph g = Graph::Complete(3);
  std::vector<RobotState> s;
  std::vector<OutboundMessage> out;
  for (int i = 0; i < 3; ++i) {
    s.push_back(InitState(AlgorithmKind::kCadmm, p, i, Scalar(i)));
    out.push_back(CadmmMessage(i, s[i]));
  }
  const RobotState a = CadmmPrimalStep(p, 0, s[0], InboxFor(g, 0, out), 1.0);
  const std::vector<const OutboundMessage*> fewer{&out[1]};
  CHECK_THROWS_AS(CadmmDualStep(0, a, fewer, 1.0), CompatibilityError);
  CHECK_THROWS_AS(CadmmPrimalStep(p, 0, s[0], fewer, 0.0), ContractViolation);
}

TEST_CASE("mixing renormalizes over missing senders") {
  const Graph g = Graph::Complete(3);
  const WeightMatrix w = Metropolis(g);  // 1/2 off-diagonal, 0 diagonal
  const OutboundMessage m1{1, {Scalar(4.0)}};
  const std::vector<const OutboundMessage*> in{&m1};
  StepFlags flags;
  CHECK(MixSlot(w, 0, Scalar(100.0), in, 0, &flags)[0] == doctest::Approx(4.0));
  CHECK(flags.renormalized);
}

TEST_CASE("message sizes") {
  const OutboundMessage m{0, {Vector::Zero(32)}};
  CHECK(m.byte_size() == 256);
  const OutboundMessage two{0, {Vector::Zero(5), Vector::Zero(5)}};
  CHECK(two.real_count() == 10);
}

TEST_CASE("singular local Hessians are regularized") {
  const LocalFactorization f(Matrix::Zero(2, 2));
  CHECK(f.regularized());
  CHECK(f.Solve(Vector::Ones(2)).allFinite());
}
