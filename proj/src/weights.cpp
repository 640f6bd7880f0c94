#include "distopt/weights.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "distopt/error.hpp"

namespace distopt {

WeightMatrix Metropolis(const Graph& g) {
  if (g.directed()) {
    throw ContractViolation(
        "Metropolis weights assume an undirected network with bi-directional links");
  }
  const int n = g.size();
  WeightMatrix w{Eigen::MatrixXd::Zero(n, n), StochasticKind::kDoubly, g.Fingerprint()};
  for (const auto& [i, j] : g.edges()) {
    const double d = static_cast<double>(
        std::max(g.Neighbors(i).size(), g.Neighbors(j).size()));
    w.values(i, j) = 1.0 / d;
    w.values(j, i) = 1.0 / d;
  }
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j : g.Neighbors(i)) off += w.values(i, j);
    // The remainder can round to -eps when the row is already full.
    w.values(i, i) = std::max(0.0, 1.0 - off);
  }
  return w;
}

WeightMatrix UniformRowStochastic(const Graph& g) {
  const int n = g.size();
  WeightMatrix w{Eigen::MatrixXd::Zero(n, n), StochasticKind::kRow, g.Fingerprint()};
  for (int i = 0; i < n; ++i) {
    const double share = 1.0 / static_cast<double>(g.InNeighbors(i).size() + 1);
    w.values(i, i) = share;
    for (int j : g.InNeighbors(i)) w.values(i, j) = share;
  }
  return w;
}

WeightMatrix UniformColumnStochastic(const Graph& g) {
  const int n = g.size();
  WeightMatrix w{Eigen::MatrixXd::Zero(n, n), StochasticKind::kColumn, g.Fingerprint()};
  for (int i = 0; i < n; ++i) {
    const double share = 1.0 / static_cast<double>(g.OutNeighbors(i).size() + 1);
    w.values(i, i) = share;
    for (int j : g.OutNeighbors(i)) w.values(j, i) = share;
  }
  return w;
}

std::string WeightViolation::Describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::kNegative:
      os << "negative entry w(" << row << "," << col << ") = " << value;
      break;
    case Kind::kSparsity:
      os << "w(" << row << "," << col << ") = " << value << " but no arc " << col << "->" << row;
      break;
    case Kind::kRowSum:
      os << "row " << row << " sums to " << value;
      break;
    case Kind::kColumnSum:
      os << "column " << col << " sums to " << value;
      break;
    case Kind::kSize:
      os << "matrix size " << value << " does not match graph";
      break;
  }
  return os.str();
}

std::vector<WeightViolation> Validate(const WeightMatrix& w, const Graph& g, double tol) {
  using Kind = WeightViolation::Kind;
  std::vector<WeightViolation> out;
  const int n = g.size();
  if (w.values.rows() != n || w.values.cols() != n) {
    out.push_back({Kind::kSize, -1, -1, static_cast<double>(w.values.rows())});
    return out;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = w.values(i, j);
      if (v < 0.0) out.push_back({Kind::kNegative, i, j, v});
      if (i != j && v != 0.0 && !g.HasArc(j, i)) out.push_back({Kind::kSparsity, i, j, v});
    }
  }
  const bool check_rows = w.kind != StochasticKind::kColumn;
  const bool check_cols = w.kind != StochasticKind::kRow;
  if (check_rows) {
    for (int i = 0; i < n; ++i) {
      const double s = w.values.row(i).sum();
      if (std::abs(s - 1.0) > tol) out.push_back({Kind::kRowSum, i, -1, s});
    }
  }
  if (check_cols) {
    for (int j = 0; j < n; ++j) {
      const double s = w.values.col(j).sum();
      if (std::abs(s - 1.0) > tol) out.push_back({Kind::kColumnSum, -1, j, s});
    }
  }
  return out;
}

void RequireCompatible(const WeightMatrix& w, const Graph& g) {
  if (w.graph_fingerprint != g.Fingerprint()) {
    throw ContractViolation("weight matrix was built for a different topology");
  }
}

}  // namespace distopt
