#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "distopt/problem.hpp"
#include "distopt/weights.hpp"

namespace distopt {

enum class AlgorithmKind { kDgdCta, kDgdAtc, kDiging, kNextQ, kCadmm };

std::string_view ToString(AlgorithmKind kind);
AlgorithmKind ParseAlgorithm(std::string_view name);

enum class ScheduleKind { kConstant, kInverse, kInverseSqrt };

std::string_view ToString(ScheduleKind kind);
ScheduleKind ParseSchedule(std::string_view name);

/// Step-size rule alpha(k). Diminishing rules are indexed from k + 1.
class StepSchedule {
 public:
  static StepSchedule Make(ScheduleKind kind, double alpha0);
  static StepSchedule Constant(double alpha) { return Make(ScheduleKind::kConstant, alpha); }

  double operator()(std::int64_t k) const;
  double Evaluate(std::int64_t k) const { return (*this)(k); }

  ScheduleKind kind() const { return kind_; }
  double alpha0() const { return alpha0_; }

 private:
  StepSchedule(ScheduleKind kind, double alpha0) : kind_(kind), alpha0_(alpha0) {}
  ScheduleKind kind_;
  double alpha0_;
};

/// Per-robot iterate bundle. Which fields are live depends on the algorithm:
///   DGD:    x, last_grad
///   DIGing: x, y (gradient tracker), last_grad
///   NEXT-Q: x, y, pi, z, last_grad
///   C-ADMM: x, y (composite dual), pending_x and neighbor_snapshot between half-rounds
struct RobotState {
  Vector x;
  Vector y;
  Vector pi;
  Vector z;
  Vector last_grad;
  Vector pending_x;
  std::vector<int> neighbor_snapshot;
};

struct OutboundMessage {
  int sender = -1;
  std::vector<Vector> payload;

  std::size_t real_count() const;
  std::size_t byte_size() const { return 8 * real_count(); }
};

using Inbox = std::span<const OutboundMessage* const>;

// Number of n-vectors each algorithm communicates per exchange.
int PayloadVectors(AlgorithmKind kind);

// Side-channel for conditions the step tolerated rather than rejected.
struct StepFlags {
  bool renormalized = false;  // a weighted neighbor was missing from the inbox
};

// Sum_{j in inbox + self} w_ij v_j for payload slot `slot`. If a neighbor with w_ij > 0
// is absent the row is renormalized over the received senders (row/doubly kinds).
Vector MixSlot(const WeightMatrix& w, int i, const Vector& own, Inbox inbox, int slot,
               StepFlags* flags = nullptr);

// Cholesky of a local system, regularized by eps*I when the matrix is singular.
class LocalFactorization {
 public:
  LocalFactorization() = default;
  explicit LocalFactorization(const Matrix& h, double eps = 1e-8);
  Vector Solve(const Vector& rhs) const { return llt_.solve(rhs); }
  bool regularized() const { return regularized_; }

 private:
  Eigen::LLT<Matrix> llt_;
  bool regularized_ = false;
};

// Caches (P_i + 2 s I) factorizations per (robot, s) for the C-ADMM primal step.
class ProxCache {
 public:
  explicit ProxCache(const SeparableProblem& problem) : problem_(&problem) {}
  Vector Solve(int i, const Vector& linear, double penalty_scale, const Vector& anchor);

 private:
  const SeparableProblem* problem_;
  std::map<std::pair<int, double>, Eigen::LLT<Matrix>> cache_;
};

RobotState InitState(AlgorithmKind kind, const SeparableProblem& problem, int i, const Vector& x0);

// --- DGD, combine-then-adapt ------------------------------------------------
OutboundMessage DgdMessage(int i, const RobotState& s);
RobotState DgdCtaStep(const SeparableProblem& problem, int i, const RobotState& s, Inbox inbox,
                      const WeightMatrix& w, const StepSchedule& schedule, std::int64_t k,
                      StepFlags* flags = nullptr);

// --- DGD, adapt-then-combine ------------------------------------------------
// Message carries x_i - alpha_i(k) grad f_i(x_i); each robot may use its own schedule.
OutboundMessage DgdAtcMessage(int i, const RobotState& s, const StepSchedule& own_schedule,
                              std::int64_t k);
RobotState DgdAtcStep(const SeparableProblem& problem, int i, const RobotState& s, Inbox inbox,
                      const WeightMatrix& w, const StepSchedule& own_schedule, std::int64_t k,
                      StepFlags* flags = nullptr);

// --- DIGing (gradient tracking, constant step) -------------------------------
OutboundMessage DigingMessage(int i, const RobotState& s);
RobotState DigingStep(const SeparableProblem& problem, int i, const RobotState& s, Inbox inbox,
                      const WeightMatrix& w, double alpha, StepFlags* flags = nullptr);

// --- NEXT with quadratic surrogate ------------------------------------------
// Local phase: solves the surrogate with Hessian H_i and forms z_i.
RobotState NextQPrepare(int i, const RobotState& s, const LocalFactorization& hessian,
                        const StepSchedule& schedule, std::int64_t k);
OutboundMessage NextQMessage(int i, const RobotState& prepared);
// Consensus phase on the received (z_j, y_j).
RobotState NextQStep(const SeparableProblem& problem, int i, const RobotState& prepared,
                     Inbox inbox, const WeightMatrix& w, StepFlags* flags = nullptr);

// --- C-ADMM -------------------------------------------------------------------
OutboundMessage CadmmMessage(int i, const RobotState& s);
// Primal half-round on neighbors' x_j^(k); result holds x^(k+1) in pending_x.
RobotState CadmmPrimalStep(const SeparableProblem& problem, int i, const RobotState& s,
                           Inbox inbox, double rho, ProxCache* cache = nullptr);
OutboundMessage CadmmPendingMessage(int i, const RobotState& after_primal);
// Dual half-round on neighbors' x_j^(k+1); the sender set must match the primal inbox.
RobotState CadmmDualStep(int i, const RobotState& after_primal, Inbox inbox, double rho);

}  // namespace distopt
