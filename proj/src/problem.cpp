#include "distopt/problem.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "distopt/error.hpp"
#include "distopt/random.hpp"

namespace distopt {

namespace {

constexpr double kSymmetryTolerance = 1e-12;

Matrix InverseSpd(const Matrix& m, const std::string& what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericError(what + " is not positive definite");
  return llt.solve(Matrix::Identity(m.rows(), m.cols()));
}

std::uint64_t HashDoubles(std::uint64_t h, const double* data, Eigen::Index count) {
  for (Eigen::Index k = 0; k < count; ++k) h = Mix64(h ^ std::bit_cast<std::uint64_t>(data[k]));
  return h;
}

// Draws from N(0, cov) using a Cholesky factor.
Vector SampleGaussian(std::mt19937_64& rng, const Matrix& cov) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(cov.rows());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(rng);
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericError("covariance is not positive definite");
  return llt.matrixL() * z;
}

// Adds w * |J x - b|^2_Omega with J selecting a 4-block at `col` via `block`.
void AddWeightedResidual(Matrix& P, Vector& r, double& c, const std::vector<std::pair<int, Matrix>>& blocks,
                         const Vector& b, const Matrix& omega, double weight) {
  // |sum_k B_k x_{col_k} - b|^2_Omega = x'J'ΩJx - 2b'ΩJx + b'Ωb; quadratic form uses 1/2 x'Px.
  for (const auto& [ci, Bi] : blocks) {
    for (const auto& [cj, Bj] : blocks) {
      P.block(ci, cj, Bi.cols(), Bj.cols()) += 2.0 * weight * Bi.transpose() * omega * Bj;
    }
    r.segment(ci, Bi.cols()) -= 2.0 * weight * Bi.transpose() * omega * b;
  }
  c += weight * b.dot(omega * b);
}

}  // namespace

double QuadraticLocalCost::Evaluate(const Vector& x) const {
  return 0.5 * x.dot(hessian * x) + linear.dot(x) + constant;
}

Vector QuadraticLocalCost::Gradient(const Vector& x) const { return hessian * x + linear; }

SeparableProblem::SeparableProblem(std::vector<QuadraticLocalCost> costs, std::string label)
    : costs_(std::move(costs)), label_(std::move(label)) {
  if (costs_.empty()) throw ContractViolation("separable problem needs at least one robot");
  dim_ = costs_.front().dim();
  if (dim_ <= 0) throw ContractViolation("decision dimension must be positive");
  for (std::size_t i = 0; i < costs_.size(); ++i) {
    const auto& c = costs_[i];
    if (c.dim() != dim_ || c.hessian.rows() != dim_ || c.hessian.cols() != dim_) {
      throw ContractViolation("robot " + std::to_string(i) + " cost has mismatched dimensions");
    }
    const double asym = (c.hessian - c.hessian.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTolerance * std::max(1.0, c.hessian.cwiseAbs().maxCoeff())) {
      throw ContractViolation("robot " + std::to_string(i) + " Hessian is not symmetric");
    }
  }
}

double SeparableProblem::LocalCost(int i, const Vector& x) const { return cost(i).Evaluate(x); }

double SeparableProblem::JointCost(const Vector& x) const {
  double total = 0.0;
  for (const auto& c : costs_) total += c.Evaluate(x);
  return total;
}

Vector SeparableProblem::Gradient(int i, const Vector& x) const { return cost(i).Gradient(x); }

Vector SeparableProblem::LocalProx(int i, const Vector& linear, double penalty_scale,
                                   const Vector& anchor) const {
  if (penalty_scale < 0.0) throw ContractViolation("prox penalty scale must be >= 0");
  const auto& c = cost(i);
  Matrix system = c.hessian;
  system.diagonal().array() += 2.0 * penalty_scale;
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) {
    throw NumericError("local prox system for robot " + std::to_string(i) + " is singular");
  }
  return llt.solve(2.0 * penalty_scale * anchor - c.linear - linear);
}

std::uint64_t SeparableProblem::Fingerprint() const {
  std::uint64_t h = CounterHash(costs_.size(), dim_, 0xc0ffee);
  for (const auto& c : costs_) {
    h = HashDoubles(h, c.hessian.data(), c.hessian.size());
    h = HashDoubles(h, c.linear.data(), c.linear.size());
    h = HashDoubles(h, &c.constant, 1);
  }
  return h;
}

Vector OracleSolve(const SeparableProblem& problem) {
  const int n = problem.dimension();
  Matrix H = Matrix::Zero(n, n);
  Vector r = Vector::Zero(n);
  for (int i = 0; i < problem.robot_count(); ++i) {
    H += problem.cost(i).hessian;
    r += problem.cost(i).linear;
  }
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success) throw NumericError("joint Hessian is singular");
  return llt.solve(-r);
}

std::vector<ConsensusConstraint> LiftToConsensus(const SeparableProblem& problem, const Graph& g) {
  if (g.size() != problem.robot_count()) {
    throw ContractViolation("graph has " + std::to_string(g.size()) + " vertices but problem has " +
                            std::to_string(problem.robot_count()) + " robots");
  }
  if (g.directed() ? !IsWeaklyConnected(g) : !IsConnected(g)) {
    throw ContractViolation(std::string("consensus lifting requires a ") +
                            (g.directed() ? "weakly connected" : "connected") +
                            " communication graph; the lifted optimum would differ from the "
                            "joint optimum");
  }
  std::vector<ConsensusConstraint> out;
  out.reserve(g.edge_count());
  for (const auto& [a, b] : g.edges()) out.push_back({a, b});
  return out;
}

// ---------------------------------------------------------------------------

bool TargetTrackingSpec::has_measurements() const {
  if (static_cast<int>(y_it.size()) != N) return false;
  for (int i = 0; i < N; ++i) {
    if (y_it[i].size() != T_i[i].size()) return false;
  }
  return true;
}

TargetTrackingSpec MakeTrackingSpec(int n_robots, int n_steps, std::uint64_t seed,
                                    const TrackingDefaults& d) {
  if (n_robots <= 0 || n_steps <= 0) throw ContractViolation("tracking needs N > 0 and T > 0");
  TargetTrackingSpec s;
  s.N = n_robots;
  s.T = n_steps;
  s.seed = seed;

  Matrix A = Matrix::Identity(4, 4);
  A(0, 2) = d.dt;
  A(1, 3) = d.dt;
  s.A_t.assign(n_steps - 1, A);
  s.Q_t.assign(n_steps - 1, d.process_noise * Matrix::Identity(4, 4));

  Matrix C = Matrix::Zero(2, 4);
  C(0, 0) = 1.0;
  C(1, 1) = 1.0;
  s.C_it.assign(n_robots, std::vector<Matrix>(n_steps, C));
  s.R_it.assign(n_robots, std::vector<Matrix>(n_steps, d.measurement_noise * Matrix::Identity(2, 2)));

  s.x0_bar = d.x0_bar;
  s.P0_bar = d.prior_covariance * Matrix::Identity(4, 4);

  const int window = std::clamp(d.window > 0 ? d.window : (n_steps + 1) / 2, 1, n_steps);
  s.T_i.resize(n_robots);
  for (int i = 0; i < n_robots; ++i) {
    const int start = n_robots > 1 ? static_cast<int>(std::lround(static_cast<double>(i) *
                                                                  (n_steps - window) /
                                                                  (n_robots - 1)))
                                   : 0;
    for (int t = start; t < start + window; ++t) s.T_i[i].push_back(t);
  }
  return s;
}

TargetTrackingSpec SimulateTargetData(TargetTrackingSpec spec) {
  std::mt19937_64 rng(Mix64(spec.seed ^ 0x7a46e7));
  std::vector<Vector> states;
  states.reserve(spec.T);
  states.push_back(spec.x0_bar + SampleGaussian(rng, spec.P0_bar));
  for (int t = 0; t + 1 < spec.T; ++t) {
    states.push_back(spec.A_t[t] * states.back() + SampleGaussian(rng, spec.Q_t[t]));
  }
  spec.y_it.assign(spec.N, {});
  for (int i = 0; i < spec.N; ++i) {
    for (int t : spec.T_i[i]) {
      spec.y_it[i].push_back(spec.C_it[i][t] * states[t] + SampleGaussian(rng, spec.R_it[i][t]));
    }
  }
  return spec;
}

Vector NominalRollout(const TargetTrackingSpec& spec) {
  Vector x(spec.dimension());
  x.segment<4>(0) = spec.x0_bar;
  for (int t = 0; t + 1 < spec.T; ++t) x.segment<4>(4 * (t + 1)) = spec.A_t[t] * x.segment<4>(4 * t);
  return x;
}

namespace {

void CheckTrackingShapes(const TargetTrackingSpec& s) {
  if (s.N <= 0 || s.T <= 0) throw ContractViolation("tracking spec needs N > 0 and T > 0");
  auto bad = [](const std::string& what) { throw ContractViolation("tracking spec: " + what); };
  if (static_cast<int>(s.A_t.size()) != s.T - 1 || static_cast<int>(s.Q_t.size()) != s.T - 1)
    bad("A_t and Q_t need T-1 entries");
  if (static_cast<int>(s.C_it.size()) != s.N || static_cast<int>(s.R_it.size()) != s.N ||
      static_cast<int>(s.T_i.size()) != s.N)
    bad("C_it, R_it and T_i need N entries");
  if (s.x0_bar.size() != 4 || s.P0_bar.rows() != 4 || s.P0_bar.cols() != 4) bad("prior must be 4-dimensional");
  for (int i = 0; i < s.N; ++i) {
    if (static_cast<int>(s.C_it[i].size()) != s.T || static_cast<int>(s.R_it[i].size()) != s.T)
      bad("C_it[i] and R_it[i] need T entries");
    for (int t : s.T_i[i])
      if (t < 0 || t >= s.T) bad("T_i entry outside [0, T)");
  }
  if (!s.has_measurements()) bad("measurements y_it missing; run SimulateTargetData first");
}

}  // namespace

SeparableProblem BuildTargetTracking(const TargetTrackingSpec& s) {
  CheckTrackingShapes(s);
  const int n = s.dimension();
  const double share = 1.0 / s.N;
  const Matrix prior_info = InverseSpd(s.P0_bar, "prior covariance P0_bar");
  std::vector<Matrix> process_info;
  for (int t = 0; t + 1 < s.T; ++t) {
    process_info.push_back(InverseSpd(s.Q_t[t], "process covariance Q_t[" + std::to_string(t) + "]"));
  }

  const Matrix I4 = Matrix::Identity(4, 4);
  std::vector<QuadraticLocalCost> costs;
  costs.reserve(s.N);
  for (int i = 0; i < s.N; ++i) {
    Matrix P = Matrix::Zero(n, n);
    Vector r = Vector::Zero(n);
    double c = 0.0;
    AddWeightedResidual(P, r, c, {{0, I4}}, s.x0_bar, prior_info, share);
    for (int t = 0; t + 1 < s.T; ++t) {
      AddWeightedResidual(P, r, c, {{4 * (t + 1), I4}, {4 * t, -s.A_t[t]}}, Vector::Zero(4),
                          process_info[t], share);
    }
    for (std::size_t k = 0; k < s.T_i[i].size(); ++k) {
      const int t = s.T_i[i][k];
      const Matrix info = InverseSpd(s.R_it[i][t], "measurement covariance R_it[" +
                                                       std::to_string(i) + "][" + std::to_string(t) + "]");
      AddWeightedResidual(P, r, c, {{4 * t, s.C_it[i][t]}}, s.y_it[i][k], info, 1.0);
    }
    P = 0.5 * (P + P.transpose());
    costs.push_back({std::move(P), std::move(r), c});
  }
  return SeparableProblem(std::move(costs), "target-tracking");
}

double TrackingGlobalCost(const TargetTrackingSpec& s, const Vector& x) {
  CheckTrackingShapes(s);
  auto sq = [](const Vector& v, const Matrix& cov) {
    return v.dot(cov.llt().solve(v));
  };
  double f = sq(x.segment<4>(0) - s.x0_bar, s.P0_bar);
  for (int t = 0; t + 1 < s.T; ++t) {
    f += sq(x.segment<4>(4 * (t + 1)) - s.A_t[t] * x.segment<4>(4 * t), s.Q_t[t]);
  }
  for (int i = 0; i < s.N; ++i) {
    for (std::size_t k = 0; k < s.T_i[i].size(); ++k) {
      const int t = s.T_i[i][k];
      f += sq(s.y_it[i][k] - s.C_it[i][t] * x.segment<4>(4 * t), s.R_it[i][t]);
    }
  }
  return f;
}

// ---------------------------------------------------------------------------

FactoredLeastSquaresSpec GenerateFactoredLs(int n, const std::vector<int>& m, std::uint64_t seed,
                                            const FactoredGeneratorOptions& opt) {
  if (n <= 0 || m.empty()) throw ContractViolation("factored least squares needs n > 0 and N > 0");
  FactoredLeastSquaresSpec spec;
  spec.N = static_cast<int>(m.size());
  spec.n = n;
  spec.seed = seed;
  std::mt19937_64 rng(Mix64(seed ^ 0xfac7));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> weight(opt.weight_lo, opt.weight_hi);

  Vector truth(n);
  for (int k = 0; k < n; ++k) truth[k] = normal(rng);
  for (int rows : m) {
    if (rows <= 0) throw ContractViolation("each robot needs at least one measurement row");
    FactoredBlock b;
    b.G.resize(rows, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < n; ++c) b.G(r, c) = scale * normal(rng);
    b.M_diag.resize(rows);
    for (int r = 0; r < rows; ++r) b.M_diag[r] = weight(rng);
    b.z = b.G * truth;
    for (int r = 0; r < rows; ++r) b.z[r] += opt.measurement_noise * normal(rng);
    spec.blocks.push_back(std::move(b));
  }
  return spec;
}

namespace {

Matrix WeightTimes(const FactoredBlock& b, const Matrix& v) {
  if (b.diagonal_weight()) return b.M_diag.asDiagonal() * v;
  return b.M * v;
}

void CheckFactored(const FactoredLeastSquaresSpec& s) {
  if (s.N != static_cast<int>(s.blocks.size())) {
    throw ContractViolation("factored spec: N = " + std::to_string(s.N) + " but " +
                            std::to_string(s.blocks.size()) + " blocks given");
  }
  for (int i = 0; i < s.N; ++i) {
    const auto& b = s.blocks[i];
    const std::string who = "factored spec robot " + std::to_string(i) + ": ";
    if (b.G.cols() != s.n) throw ContractViolation(who + "G has " + std::to_string(b.G.cols()) + " columns, expected n = " + std::to_string(s.n));
    if (b.z.size() != b.G.rows()) throw ContractViolation(who + "z length does not match rows of G");
    if (b.diagonal_weight()) {
      if (b.M_diag.size() != b.G.rows()) throw ContractViolation(who + "diagonal M length does not match rows of G");
      if ((b.M_diag.array() <= 0.0).any()) throw ContractViolation(who + "M must be positive definite");
    } else if (b.M.rows() != b.G.rows() || b.M.cols() != b.G.rows()) {
      throw ContractViolation(who + "M must be m_i x m_i");
    }
  }
}

}  // namespace

SeparableProblem BuildFactoredLs(const FactoredLeastSquaresSpec& s) {
  CheckFactored(s);
  std::vector<QuadraticLocalCost> costs;
  costs.reserve(s.N);
  for (const auto& b : s.blocks) {
    const Matrix MG = WeightTimes(b, b.G);
    const Vector Mz = WeightTimes(b, b.z).col(0);
    Matrix P = 2.0 * b.G.transpose() * MG;
    P = 0.5 * (P + P.transpose());
    costs.push_back({std::move(P), -2.0 * b.G.transpose() * Mz, b.z.dot(Mz)});
  }
  return SeparableProblem(std::move(costs), "factored-ls");
}

double FactoredGlobalCost(const FactoredLeastSquaresSpec& s, const Vector& p) {
  CheckFactored(s);
  double f = 0.0;
  for (const auto& b : s.blocks) {
    const Vector e = b.G * p - b.z;
    f += e.dot(WeightTimes(b, e).col(0));
  }
  return f;
}

SeparableProblem ScalarConsensusProblem(const std::vector<double>& targets) {
  std::vector<QuadraticLocalCost> costs;
  for (double a : targets) {
    costs.push_back({Matrix::Constant(1, 1, 2.0), Vector::Constant(1, -2.0 * a), a * a});
  }
  return SeparableProblem(std::move(costs), "scalar-consensus");
}

}  // namespace distopt
