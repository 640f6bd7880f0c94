#include "distopt/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "distopt/error.hpp"

namespace distopt {

std::string_view ToString(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::kDgdCta:
      return "dgd-cta";
    case AlgorithmKind::kDgdAtc:
      return "dgd-atc";
    case AlgorithmKind::kDiging:
      return "diging";
    case AlgorithmKind::kNextQ:
      return "next-q";
    case AlgorithmKind::kCadmm:
      return "cadmm";
  }
  return "?";
}

AlgorithmKind ParseAlgorithm(std::string_view name) {
  for (auto k : {AlgorithmKind::kDgdCta, AlgorithmKind::kDgdAtc, AlgorithmKind::kDiging,
                 AlgorithmKind::kNextQ, AlgorithmKind::kCadmm}) {
    if (name == ToString(k)) return k;
  }
  throw ConfigError("unknown algorithm '" + std::string(name) +
                    "' (expected dgd-cta, dgd-atc, diging, next-q or cadmm)");
}

std::string_view ToString(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kConstant:
      return "constant";
    case ScheduleKind::kInverse:
      return "inverse";
    case ScheduleKind::kInverseSqrt:
      return "inverse-sqrt";
  }
  return "?";
}

ScheduleKind ParseSchedule(std::string_view name) {
  if (name == "constant") return ScheduleKind::kConstant;
  if (name == "inverse") return ScheduleKind::kInverse;
  if (name == "inverse-sqrt") return ScheduleKind::kInverseSqrt;
  throw ConfigError("unknown step schedule '" + std::string(name) +
                    "' (expected constant, inverse or inverse-sqrt)");
}

StepSchedule StepSchedule::Make(ScheduleKind kind, double alpha0) {
  if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) {
    throw ContractViolation("step size alpha0 must be positive and finite");
  }
  return StepSchedule(kind, alpha0);
}

double StepSchedule::operator()(std::int64_t k) const {
  const double kk = static_cast<double>(k) + 1.0;
  switch (kind_) {
    case ScheduleKind::kConstant:
      return alpha0_;
    case ScheduleKind::kInverse:
      return alpha0_ / kk;
    case ScheduleKind::kInverseSqrt:
      return alpha0_ / std::sqrt(kk);
  }
  return alpha0_;
}

std::size_t OutboundMessage::real_count() const {
  std::size_t n = 0;
  for (const auto& v : payload) n += static_cast<std::size_t>(v.size());
  return n;
}

int PayloadVectors(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::kDiging:
    case AlgorithmKind::kNextQ:
      return 2;
    default:
      return 1;
  }
}

Vector MixSlot(const WeightMatrix& w, int i, const Vector& own, Inbox inbox, int slot,
               StepFlags* flags) {
  Vector acc = w(i, i) * own;
  double received = w(i, i);
  for (const OutboundMessage* m : inbox) {
    const double wij = w(i, m->sender);
    acc.noalias() += wij * m->payload[slot];
    received += wij;
  }
  double expected = 0.0;
  for (int j = 0; j < w.size(); ++j) expected += w(i, j);
  if (expected - received > 1e-12) {
    if (flags) flags->renormalized = true;
    if (w.kind != StochasticKind::kColumn && received > 0.0) acc /= received;
  }
  return acc;
}

LocalFactorization::LocalFactorization(const Matrix& h, double eps) : llt_(h) {
  if (llt_.info() != Eigen::Success) {
    Matrix reg = h;
    reg.diagonal().array() += eps;
    llt_.compute(reg);
    regularized_ = true;
    if (llt_.info() != Eigen::Success) throw NumericError("local Hessian is not positive semidefinite");
  }
}

Vector ProxCache::Solve(int i, const Vector& linear, double penalty_scale, const Vector& anchor) {
  const auto key = std::make_pair(i, penalty_scale);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    Matrix system = problem_->Hessian(i);
    system.diagonal().array() += 2.0 * penalty_scale;
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success) {
      throw NumericError("local prox system for robot " + std::to_string(i) + " is singular");
    }
    it = cache_.emplace(key, std::move(llt)).first;
  }
  return it->second.solve(2.0 * penalty_scale * anchor - problem_->cost(i).linear - linear);
}

RobotState InitState(AlgorithmKind kind, const SeparableProblem& problem, int i, const Vector& x0) {
  RobotState s;
  s.x = x0;
  s.last_grad = problem.Gradient(i, x0);
  switch (kind) {
    case AlgorithmKind::kDiging:
      s.y = s.last_grad;
      break;
    case AlgorithmKind::kNextQ:
      s.y = s.last_grad;
      s.pi = problem.robot_count() * s.y - s.last_grad;
      s.z = x0;
      break;
    case AlgorithmKind::kCadmm:
      s.y = Vector::Zero(x0.size());
      break;
    default:
      break;
  }
  return s;
}

OutboundMessage DgdMessage(int i, const RobotState& s) { return {i, {s.x}}; }

RobotState DgdCtaStep(const SeparableProblem& problem, int i, const RobotState& s, Inbox inbox,
                      const WeightMatrix& w, const StepSchedule& schedule, std::int64_t k,
                      StepFlags* flags) {
  RobotState next = s;
  next.x = MixSlot(w, i, s.x, inbox, 0, flags) - schedule(k) * s.last_grad;
  next.last_grad = problem.Gradient(i, next.x);
  return next;
}

OutboundMessage DgdAtcMessage(int i, const RobotState& s, const StepSchedule& own_schedule,
                              std::int64_t k) {
  return {i, {s.x - own_schedule(k) * s.last_grad}};
}

RobotState DgdAtcStep(const SeparableProblem& problem, int i, const RobotState& s, Inbox inbox,
                      const WeightMatrix& w, const StepSchedule& own_schedule, std::int64_t k,
                      StepFlags* flags) {
  RobotState next = s;
  const Vector adapted = s.x - own_schedule(k) * s.last_grad;
  next.x = MixSlot(w, i, adapted, inbox, 0, flags);
  next.last_grad = problem.Gradient(i, next.x);
  return next;
}

OutboundMessage DigingMessage(int i, const RobotState& s) { return {i, {s.x, s.y}}; }

RobotState DigingStep(const SeparableProblem& problem, int i, const RobotState& s, Inbox inbox,
                      const WeightMatrix& w, double alpha, StepFlags* flags) {
  RobotState next = s;
  next.x = MixSlot(w, i, s.x, inbox, 0, flags) - alpha * s.y;
  const Vector grad = problem.Gradient(i, next.x);
  next.y = MixSlot(w, i, s.y, inbox, 1, flags) + grad - s.last_grad;
  next.last_grad = grad;
  return next;
}

RobotState NextQPrepare(int /*i*/, const RobotState& s, const LocalFactorization& hessian,
                        const StepSchedule& schedule, std::int64_t k) {
  RobotState out = s;
  const Vector x_tilde = s.x - hessian.Solve(s.last_grad + s.pi);
  out.z = s.x + schedule(k) * (x_tilde - s.x);
  return out;
}

OutboundMessage NextQMessage(int i, const RobotState& prepared) {
  return {i, {prepared.z, prepared.y}};
}

RobotState NextQStep(const SeparableProblem& problem, int i, const RobotState& prepared,
                     Inbox inbox, const WeightMatrix& w, StepFlags* flags) {
  RobotState next = prepared;
  next.x = MixSlot(w, i, prepared.z, inbox, 0, flags);
  const Vector grad = problem.Gradient(i, next.x);
  next.y = MixSlot(w, i, prepared.y, inbox, 1, flags) + grad - prepared.last_grad;
  next.pi = problem.robot_count() * next.y - grad;
  next.last_grad = grad;
  next.z = next.x;
  return next;
}

OutboundMessage CadmmMessage(int i, const RobotState& s) { return {i, {s.x}}; }

RobotState CadmmPrimalStep(const SeparableProblem& problem, int i, const RobotState& s,
                           Inbox inbox, double rho, ProxCache* cache) {
  if (!(rho > 0.0)) throw ContractViolation("C-ADMM penalty rho must be positive");
  RobotState out = s;
  out.neighbor_snapshot.clear();
  const auto degree = static_cast<double>(inbox.size());
  Vector anchor = s.x;
  if (!inbox.empty()) {
    Vector sum = Vector::Zero(s.x.size());
    for (const OutboundMessage* m : inbox) {
      sum += 0.5 * (s.x + m->payload[0]);
      out.neighbor_snapshot.push_back(m->sender);
    }
    anchor = sum / degree;
  }
  std::sort(out.neighbor_snapshot.begin(), out.neighbor_snapshot.end());
  // rho * sum_j |x - m_j|^2 = rho |N_i| |x - mean_j m_j|^2 + const
  const double penalty = rho * degree;
  out.pending_x = cache ? cache->Solve(i, s.y, penalty, anchor)
                        : problem.LocalProx(i, s.y, penalty, anchor);
  return out;
}

OutboundMessage CadmmPendingMessage(int i, const RobotState& after_primal) {
  return {i, {after_primal.pending_x}};
}

RobotState CadmmDualStep(int /*i*/, const RobotState& after_primal, Inbox inbox, double rho) {
  std::vector<int> senders;
  senders.reserve(inbox.size());
  for (const OutboundMessage* m : inbox) senders.push_back(m->sender);
  std::sort(senders.begin(), senders.end());
  if (senders != after_primal.neighbor_snapshot) {
    throw CompatibilityError(
        "C-ADMM neighbor set changed between primal and dual half-rounds; ADMM needs a fixed "
        "topology within a round");
  }
  RobotState next = after_primal;
  next.x = after_primal.pending_x;
  for (const OutboundMessage* m : inbox) next.y += rho * (next.x - m->payload[0]);
  next.pending_x.resize(0);
  return next;
}

}  // namespace distopt
