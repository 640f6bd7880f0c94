#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "distopt/graph.hpp"

namespace distopt {

enum class StochasticKind { kRow, kColumn, kDoubly };

/// Mixing matrix W with w_ij != 0 (i != j) only where robot i hears robot j.
struct WeightMatrix {
  Eigen::MatrixXd values;
  StochasticKind kind = StochasticKind::kDoubly;
  std::uint64_t graph_fingerprint = 0;

  int size() const { return static_cast<int>(values.rows()); }
  double operator()(int i, int j) const { return values(i, j); }
};

// w_ij = 1 / max(|N_i|, |N_j|), diagonal takes the remainder. Undirected only.
WeightMatrix Metropolis(const Graph& g);

// Each robot splits weight evenly over its in-neighbors and itself.
WeightMatrix UniformRowStochastic(const Graph& g);
// Each robot splits weight evenly over its out-neighbors and itself (columns sum to one).
WeightMatrix UniformColumnStochastic(const Graph& g);

struct WeightViolation {
  enum class Kind { kNegative, kSparsity, kRowSum, kColumnSum, kSize };
  Kind kind;
  int row;
  int col;  // -1 for row-sum violations, row = -1 for column-sum violations
  double value;

  std::string Describe() const;
};

inline constexpr double kStochasticTolerance = 1e-12;

// Empty iff nonnegativity, sparsity compatibility and the kind's sum conditions hold.
std::vector<WeightViolation> Validate(const WeightMatrix& w, const Graph& g,
                                      double tol = kStochasticTolerance);

// Throws unless w was built against g.
void RequireCompatible(const WeightMatrix& w, const Graph& g);

}  // namespace distopt
