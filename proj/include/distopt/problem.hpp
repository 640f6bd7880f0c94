#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "distopt/graph.hpp"

namespace distopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// f_i(x) = 1/2 x' P x + r' x + c, with P symmetric positive semidefinite.
struct QuadraticLocalCost {
  Matrix hessian;  // P_i
  Vector linear;   // r_i
  double constant = 0.0;

  int dim() const { return static_cast<int>(linear.size()); }
  double Evaluate(const Vector& x) const;
  Vector Gradient(const Vector& x) const;
};

/// Sum of per-robot quadratic costs over a shared decision variable.
///
/// Every robot's feasible set is the whole space; LocalProx is the single
/// place a constrained variant would hook in.
class SeparableProblem {
 public:
  SeparableProblem() = default;
  explicit SeparableProblem(std::vector<QuadraticLocalCost> costs, std::string label = {});

  int robot_count() const { return static_cast<int>(costs_.size()); }
  int dimension() const { return dim_; }
  const std::string& label() const { return label_; }
  const QuadraticLocalCost& cost(int i) const { return costs_.at(i); }

  double LocalCost(int i, const Vector& x) const;
  double JointCost(const Vector& x) const;
  Vector Gradient(int i, const Vector& x) const;
  const Matrix& Hessian(int i) const { return costs_.at(i).hessian; }

  // argmin_x f_i(x) + linear'x + penalty_scale * |x - anchor|^2
  Vector LocalProx(int i, const Vector& linear, double penalty_scale, const Vector& anchor) const;

  std::uint64_t Fingerprint() const;

 private:
  std::vector<QuadraticLocalCost> costs_;
  int dim_ = 0;
  std::string label_;
};

// x* = -(sum P_i)^-1 (sum r_i). Throws NumericError when the joint Hessian is singular.
Vector OracleSolve(const SeparableProblem& problem);

struct ConsensusConstraint {
  int i;
  int j;
  friend bool operator==(const ConsensusConstraint&, const ConsensusConstraint&) = default;
};

// Edge-indexed x_i = x_j constraints; requires the lifted problem to match the joint one.
std::vector<ConsensusConstraint> LiftToConsensus(const SeparableProblem& problem, const Graph& g);

// ---------------------------------------------------------------------------
// Multi-drone target tracking (batch MAP trajectory estimate).

struct TargetTrackingSpec {
  int N = 0;  // robots
  int T = 0;  // timesteps; decision dimension is 4T
  std::vector<Matrix> A_t;                  // T-1 dynamics matrices, 4x4
  std::vector<Matrix> Q_t;                  // T-1 process-noise covariances, 4x4
  std::vector<std::vector<Matrix>> C_it;    // [i][t] 2x4 measurement matrices
  std::vector<std::vector<Matrix>> R_it;    // [i][t] 2x2 measurement covariances
  Vector x0_bar;                            // prior mean
  Matrix P0_bar;                            // prior covariance
  std::vector<std::vector<int>> T_i;        // sorted measurement timesteps per robot
  std::vector<std::vector<Vector>> y_it;    // [i][k] measurement at T_i[i][k]
  std::uint64_t seed = 0;

  int dimension() const { return 4 * T; }
  bool has_measurements() const;
};

struct TrackingDefaults {
  double dt = 1.0;
  double process_noise = 0.1;      // Q_t = q I
  double measurement_noise = 0.25;  // R = r I
  double prior_covariance = 1.0;    // P0 = p I
  int window = 0;                   // timesteps each drone observes; 0 selects ceil(T/2)
  Vector x0_bar = (Vector(4) << 0.0, 0.0, 1.0, 0.5).finished();
};

// Constant-velocity model with contiguous, evenly spread observation windows.
TargetTrackingSpec MakeTrackingSpec(int n_robots, int n_steps, std::uint64_t seed,
                                    const TrackingDefaults& defaults = {});

// Rolls a target trajectory and fills y_it; deterministic in spec.seed.
TargetTrackingSpec SimulateTargetData(TargetTrackingSpec spec);
// The noise-free rollout of x0_bar under A_t, stacked.
Vector NominalRollout(const TargetTrackingSpec& spec);

SeparableProblem BuildTargetTracking(const TargetTrackingSpec& spec);
// Global MAP cost evaluated directly from the spec.
double TrackingGlobalCost(const TargetTrackingSpec& spec, const Vector& x);

// ---------------------------------------------------------------------------
// Factored least squares: min_p sum_i (G_i p - z_i)' M_i (G_i p - z_i).

struct FactoredBlock {
  Matrix G;  // m_i x n
  // Weight M_i: either dense (m_i x m_i) or diagonal (m_i vector).
  Matrix M;
  Vector M_diag;
  Vector z;

  int rows() const { return static_cast<int>(G.rows()); }
  bool diagonal_weight() const { return M.size() == 0; }
};

struct FactoredLeastSquaresSpec {
  int N = 0;
  int n = 0;
  std::vector<FactoredBlock> blocks;
  std::uint64_t seed = 0;
};

struct FactoredGeneratorOptions {
  double measurement_noise = 0.1;
  double weight_lo = 0.5;  // diagonal weights drawn uniformly in [lo, hi]
  double weight_hi = 1.5;
};

// Robots observe a common parameter through random rows scaled by 1/sqrt(m_i).
FactoredLeastSquaresSpec GenerateFactoredLs(int n, const std::vector<int>& m, std::uint64_t seed,
                                            const FactoredGeneratorOptions& options = {});

// P_i = 2 G'MG, r_i = -2 G'Mz, c_i = z'Mz.
SeparableProblem BuildFactoredLs(const FactoredLeastSquaresSpec& spec);
double FactoredGlobalCost(const FactoredLeastSquaresSpec& spec, const Vector& p);

// f_i(x) = (x - a_i)^2 per robot, scalar.
SeparableProblem ScalarConsensusProblem(const std::vector<double>& targets);

}  // namespace distopt
