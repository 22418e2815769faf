/*
 * Copyright 2026 The falltail Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FALLTAIL_TRAJOPT_HPP_
#define FALLTAIL_TRAJOPT_HPP_

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "falltail/ddp.hpp"
#include "falltail/integrator.hpp"
#include "falltail/model.hpp"

namespace falltail {

/// Tangent layout of the planning state: [dp, dtheta(body side), dq_tail, dp_dot, domega, dq_tail_dot].
constexpr int kPlanningTangentDim = 16;
using PlanningTangent = Eigen::Matrix<double, kPlanningTangentDim, 1>;
using TailTorque = Eigen::Vector2d;
using PlanningSolution = Solution<PlanningState, kPlanningTangentDim, 2>;
using PlanningGain = PlanningSolution::Gain;

/// x_to "minus" x_from in the planning tangent.
inline PlanningTangent state_difference(const PlanningState& from, const PlanningState& to) {
  PlanningTangent d;
  d << to.p - from.p, rotation_difference(from.orientation, to.orientation), to.q_tail - from.q_tail,
      to.velocity() - from.velocity();
  return d;
}

inline PlanningState state_retract(const PlanningState& x, const PlanningTangent& d) {
  PlanningState r;
  r.p = x.p + d.segment<3>(0);
  r.orientation = x.orientation * UnitQuaternion::exp(d.segment<3>(3));
  r.q_tail = x.q_tail + d.segment<2>(6);
  r.set_velocity(x.velocity() + d.segment<8>(8));
  return r;
}

/// Discretized reorientation problem.
struct OCProblem {
  PlanningModel model{RobotParams{}};
  PlanningState x0;
  int horizon = 200;
  double dt = 0.002;
  UnitQuaternion target;
  double terminal_weight = 500.0;
  /// Diagonal of Q_uf over [p_dot, omega, q_tail_dot]; p_dot entries must be zero.
  Eigen::Matrix<double, 8, 1> velocity_weights =
      (Eigen::Matrix<double, 8, 1>() << 0, 0, 0, 0.01, 0.01, 0.01, 0.001, 0.001).finished();
  Eigen::Vector2d torque_weights = Eigen::Vector2d::Constant(0.001);
  /// Optional terminal penalty on [p_dot, omega, q_tail_dot]; zero by default.
  Eigen::Matrix<double, 8, 1> terminal_velocity_weights = Eigen::Matrix<double, 8, 1>::Zero();
  bool torque_box = true;
  bool workspace_cone = true;

  double budget() const { return horizon * dt; }

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (!(terminal_weight >= 0.0)) throw std::invalid_argument("terminal weight must be >= 0");
    if ((velocity_weights.array() < 0.0).any() || (torque_weights.array() < 0.0).any())
      throw std::invalid_argument("cost weights must be >= 0");
    if ((terminal_velocity_weights.array() < 0.0).any()) throw std::invalid_argument("cost weights must be >= 0");
    if (velocity_weights.head<3>().any() || terminal_velocity_weights.head<3>().any())
      throw std::invalid_argument("p_dot weights must be zero");
    if (!x0.all_finite()) throw std::invalid_argument("initial state must be finite");
  }
};

/// Default weights plus a terminal penalty that brings body and tail to rest,
/// so a fixed-length plan hands over a quiet state to the retraction phase.
inline OCProblem rest_terminal_weights() {
  OCProblem p;
  p.terminal_velocity_weights << 0, 0, 0, 5, 5, 5, 5, 5;
  return p;
}

/// Running cost: e(target, Theta) + 1/2 u_f' Q u_f + 1/2 tau' R tau.
inline double stage_cost(const PlanningState& x, const TailTorque& tau, const OCProblem& problem) {
  const auto u = x.velocity();
  return attitude_error(problem.target, x.orientation) +
         0.5 * u.dot(problem.velocity_weights.cwiseProduct(u)) +
         0.5 * tau.dot(problem.torque_weights.cwiseProduct(tau));
}

inline double terminal_cost(const PlanningState& x, const OCProblem& problem) {
  const auto u = x.velocity();
  return problem.terminal_weight * attitude_error(problem.target, x.orientation) +
         0.5 * u.dot(problem.terminal_velocity_weights.cwiseProduct(u));
}

/// Gradient and positive-semidefinite Hessian of the attitude error under a
/// body-side rotation increment.
inline void attitude_error_expansion(const UnitQuaternion& target, const UnitQuaternion& q, Vec3& grad,
                                     Mat3& hess) {
  const Mat3 re = rotation_from_quat(target).transpose() * rotation_from_quat(q);
  grad = vee(0.5 * (re - re.transpose()));
  const Mat3 h = 0.5 * (re.trace() * Mat3::Identity() - 0.5 * (re + re.transpose()));
  Eigen::SelfAdjointEigenSolver<Mat3> eig(h);
  hess = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
}

/**
 * Jacobians of discretize() in the planning tangent by central differences.
 *
 * The flight dynamics do not depend on p and are Galilean invariant, so the
 * p and p_dot columns are filled in exactly.
 */
inline void dynamics_derivatives(const PlanningModel& model, const PlanningState& x, const TailTorque& tau,
                                 double dt, Eigen::Matrix<double, 16, 16>& a, Eigen::Matrix<double, 16, 2>& b,
                                 double step = 1e-6) {
  const PlanningState nominal = discretize(model, x, tau, dt);
  a.setZero();
  a.block<3, 3>(0, 0).setIdentity();
  a.block<3, 3>(0, 8) = dt * Mat3::Identity();
  a.block<3, 3>(8, 8).setIdentity();

  const PlanningTangent scale = [&] {
    PlanningTangent s = PlanningTangent::Ones();
    s.segment<2>(6) = x.q_tail.cwiseAbs().cwiseMax(1.0);
    s.segment<8>(8) = x.velocity().cwiseAbs().cwiseMax(1.0);
    return s;
  }();
  for (int j = 3; j < 16; ++j) {
    if (j >= 8 && j < 11) continue;
    const double h = step * scale(j);
    PlanningTangent d = PlanningTangent::Zero();
    d(j) = h;
    const PlanningState plus = discretize(model, state_retract(x, d), tau, dt);
    const PlanningState minus = discretize(model, state_retract(x, -d), tau, dt);
    a.col(j) = (state_difference(nominal, plus) - state_difference(nominal, minus)) / (2.0 * h);
  }
  for (int j = 0; j < 2; ++j) {
    const double h = step * std::max(1.0, std::abs(tau(j)));
    TailTorque d = TailTorque::Zero();
    d(j) = h;
    const PlanningState plus = discretize(model, x, TailTorque(tau + d), dt);
    const PlanningState minus = discretize(model, x, TailTorque(tau - d), dt);
    b.col(j) = (state_difference(nominal, plus) - state_difference(nominal, minus)) / (2.0 * h);
  }
}

/// Adapter exposing an OCProblem to the generic solver.
class ReorientationProblem {
 public:
  static constexpr int kNx = kPlanningTangentDim;
  static constexpr int kNu = 2;
  static constexpr int kNc = 1;
  using State = PlanningState;
  using Tangent = PlanningTangent;
  using Control = TailTorque;

  ReorientationProblem(const OCProblem& problem, double derivative_step)
      : p_(problem), step_(derivative_step) {
    p_.validate();
  }

  int horizon() const { return p_.horizon; }
  const State& initial_state() const { return p_.x0; }
  State step(const State& x, const Control& u, int) const { return discretize(p_.model, x, u, p_.dt); }
  static bool all_finite(const State& x) { return x.all_finite(); }
  static Tangent difference(const State& from, const State& to) { return state_difference(from, to); }
  static State retract(const State& x, const Tangent& d) { return state_retract(x, d); }

  double stage_cost(const State& x, const Control& u, int) const { return falltail::stage_cost(x, u, p_); }
  double terminal_cost(const State& x) const { return falltail::terminal_cost(x, p_); }

  void stage_expansion(const State& x, const Control& u, int, CostExpansion<kNx, kNu>& e) const {
    Vec3 g;
    Mat3 h;
    attitude_error_expansion(p_.target, x.orientation, g, h);
    e.lx.setZero();
    e.lxx.setZero();
    e.lx.segment<3>(3) = g;
    e.lxx.block<3, 3>(3, 3) = h;
    e.lx.segment<8>(8) = p_.velocity_weights.cwiseProduct(x.velocity());
    e.lxx.block<8, 8>(8, 8) = p_.velocity_weights.asDiagonal();
    e.lu = p_.torque_weights.cwiseProduct(u);
    e.luu = p_.torque_weights.asDiagonal();
    e.lux.setZero();
  }

  void terminal_expansion(const State& x, CostExpansion<kNx, kNu>& e) const {
    Vec3 g;
    Mat3 h;
    attitude_error_expansion(p_.target, x.orientation, g, h);
    e.lx.setZero();
    e.lxx.setZero();
    e.lx.segment<3>(3) = p_.terminal_weight * g;
    e.lxx.block<3, 3>(3, 3) = p_.terminal_weight * h;
    e.lx.segment<8>(8) = p_.terminal_velocity_weights.cwiseProduct(x.velocity());
    e.lxx.block<8, 8>(8, 8) = p_.terminal_velocity_weights.asDiagonal();
  }

  void dynamics_jacobians(const State& x, const Control& u, int, Eigen::Matrix<double, kNx, kNx>& a,
                          Eigen::Matrix<double, kNx, kNu>& b) const {
    dynamics_derivatives(p_.model, x, u, p_.dt, a, b, step_);
  }

  Control control_lower() const {
    return p_.torque_box ? Control::Constant(p_.model.params().tail_torque_min)
                         : Control::Constant(-std::numeric_limits<double>::infinity());
  }
  Control control_upper() const {
    return p_.torque_box ? Control::Constant(p_.model.params().tail_torque_max)
                         : Control::Constant(std::numeric_limits<double>::infinity());
  }

  Eigen::Matrix<double, 1, 1> constraints(const State& x) const {
    Eigen::Matrix<double, 1, 1> c;
    c(0) = p_.workspace_cone ? workspace_constraint(p_.model.params(), x.q_tail(0), x.q_tail(1))
                             : -1.0;
    return c;
  }
  Eigen::Matrix<double, 1, kNx> constraint_jacobian(const State& x) const {
    Eigen::Matrix<double, 1, kNx> j = Eigen::Matrix<double, 1, kNx>::Zero();
    if (p_.workspace_cone) {
      const double th = x.q_tail(0), ps = x.q_tail(1);
      j(6) = std::sin(th) * std::cos(ps);
      j(7) = std::cos(th) * std::sin(ps);
    }
    return j;
  }

  const OCProblem& problem() const { return p_; }

 private:
  OCProblem p_;
  double step_;
};

/// Solve the reorientation problem from the given control guess (zeros if empty).
inline PlanningSolution solve(const OCProblem& problem, const SolverSettings& settings,
                              std::vector<TailTorque> initial_controls = {}) {
  if (initial_controls.empty()) initial_controls.assign(problem.horizon, TailTorque::Zero());
  std::vector<std::string> warnings;
  const ReorientationProblem adapter(problem, settings.derivative_step);
  int escape_iterations = 0;
  // The attitude error is stationary at a half-turn; nudge the first knot.
  // The nudge alone leaves |Q_u| far below the usual tolerance, so a first
  // pass with a much tighter tolerance moves the plan off the saddle.
  if (attitude_error(problem.target, problem.x0.orientation) > 2.0 - 1e-12 &&
      initial_controls.front().isZero()) {
    initial_controls.front() += TailTorque::Constant(1e-3);
    warnings.push_back("initial orientation is a half-turn from the target; perturbed first control");
    SolverSettings escape = settings;
    escape.stationarity_tolerance = std::min(settings.stationarity_tolerance, 1e-9);
    escape.cost_tolerance = std::numeric_limits<double>::min();
    escape.max_iterations = std::min(settings.max_iterations, 50);
    ConstrainedIlqr<ReorientationProblem> pre(adapter, escape);
    const PlanningSolution first = pre.solve(initial_controls);
    initial_controls = first.controls;
    escape_iterations = first.iterations;
  }
  ConstrainedIlqr<ReorientationProblem> solver(adapter, settings);
  PlanningSolution sol = solver.solve(std::move(initial_controls));
  sol.iterations += escape_iterations;
  sol.warnings.insert(sol.warnings.begin(), warnings.begin(), warnings.end());
  return sol;
}

/// Objective gradient with respect to the initial-state tangent for fixed controls.
inline PlanningTangent initial_state_gradient(const OCProblem& problem, const SolverSettings& settings,
                                              const std::vector<TailTorque>& controls) {
  const ReorientationProblem adapter(problem, settings.derivative_step);
  ConstrainedIlqr<ReorientationProblem> solver(adapter, settings);
  std::vector<PlanningState> xs;
  if (!solver.rollout(controls, xs)) throw SolverDivergence("rollout produced a non-finite state");
  return solver.initial_state_gradient(xs, controls);
}

/// Objective (no constraint terms) of rolling `controls` out from problem.x0.
inline double trajectory_cost(const OCProblem& problem, const std::vector<TailTorque>& controls) {
  PlanningState x = problem.x0;
  double total = 0.0;
  for (int k = 0; k < problem.horizon; ++k) {
    total += stage_cost(x, controls[k], problem);
    x = discretize(problem.model, x, controls[k], problem.dt);
  }
  return total + terminal_cost(x, problem);
}

/**
 * Planar double integrator with quadratic cost and no constraints; used to
 * check the solver against a Riccati recursion.
 */
class DoubleIntegratorProblem {
 public:
  static constexpr int kNx = 4;
  static constexpr int kNu = 2;
  static constexpr int kNc = 0;
  using State = Eigen::Vector4d;
  using Tangent = Eigen::Vector4d;
  using Control = Eigen::Vector2d;
  using StateMatrix = Eigen::Matrix4d;
  using InputMatrix = Eigen::Matrix<double, 4, 2>;

  DoubleIntegratorProblem(const State& x0, int horizon, double dt, const StateMatrix& q, const Eigen::Matrix2d& r,
                          const StateMatrix& qf)
      : x0_(x0), n_(horizon), q_(q), r_(r), qf_(qf) {
    a_.setIdentity();
    a_.block<2, 2>(0, 2) = dt * Eigen::Matrix2d::Identity();
    b_.setZero();
    b_.block<2, 2>(0, 0) = 0.5 * dt * dt * Eigen::Matrix2d::Identity();
    b_.block<2, 2>(2, 0) = dt * Eigen::Matrix2d::Identity();
  }

  int horizon() const { return n_; }
  const State& initial_state() const { return x0_; }
  State step(const State& x, const Control& u, int) const { return a_ * x + b_ * u; }
  static bool all_finite(const State& x) { return x.allFinite(); }
  static Tangent difference(const State& from, const State& to) { return to - from; }
  static State retract(const State& x, const Tangent& d) { return x + d; }
  double stage_cost(const State& x, const Control& u, int) const {
    return 0.5 * x.dot(q_ * x) + 0.5 * u.dot(r_ * u);
  }
  double terminal_cost(const State& x) const { return 0.5 * x.dot(qf_ * x); }
  void stage_expansion(const State& x, const Control& u, int, CostExpansion<4, 2>& e) const {
    e.lx = q_ * x;
    e.lxx = q_;
    e.lu = r_ * u;
    e.luu = r_;
    e.lux.setZero();
  }
  void terminal_expansion(const State& x, CostExpansion<4, 2>& e) const {
    e.lx = qf_ * x;
    e.lxx = qf_;
  }
  void dynamics_jacobians(const State&, const Control&, int, StateMatrix& a, InputMatrix& b) const {
    a = a_;
    b = b_;
  }
  static Control control_lower() { return Control::Constant(-std::numeric_limits<double>::infinity()); }
  static Control control_upper() { return Control::Constant(std::numeric_limits<double>::infinity()); }
  Eigen::Matrix<double, 0, 1> constraints(const State&) const { return {}; }
  Eigen::Matrix<double, 0, 4> constraint_jacobian(const State&) const { return {}; }

  const StateMatrix& a() const { return a_; }
  const InputMatrix& b() const { return b_; }

 private:
  State x0_;
  int n_;
  StateMatrix q_;
  Eigen::Matrix2d r_;
  StateMatrix qf_;
  StateMatrix a_;
  InputMatrix b_;
};

}  // namespace falltail

#endif  // FALLTAIL_TRAJOPT_HPP_
