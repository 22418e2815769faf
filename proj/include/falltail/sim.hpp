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

#ifndef FALLTAIL_SIM_HPP_
#define FALLTAIL_SIM_HPP_

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "falltail/contact.hpp"
#include "falltail/control.hpp"
#include "falltail/integrator.hpp"
#include "falltail/trajopt.hpp"

namespace falltail {

struct ModelError {
  double tail_mass_scale = 1.0;
  double body_mass_scale = 1.0;
  double body_inertia_scale = 1.0;

  void validate() const {
    if (!(tail_mass_scale > 0.0 && body_mass_scale > 0.0 && body_inertia_scale > 0.0))
      throw std::invalid_argument("model error scale factors must be > 0");
  }
};

/// Parameters of the simulated plant; the planner keeps the nominal ones.
inline RobotParams inject_model_error(const RobotParams& nominal, const ModelError& error) {
  error.validate();
  RobotParams p = nominal;
  p.tail_mass *= error.tail_mass_scale;
  p.body_mass *= error.body_mass_scale;
  p.body_inertia *= error.body_inertia_scale;
  p.validate();
  return p;
}

enum class ControllerMode { kPlanned, kFeedforward, kNoRetract };

inline const char* controller_mode_name(ControllerMode m) {
  switch (m) {
    case ControllerMode::kPlanned: return "planned";
    case ControllerMode::kFeedforward: return "feedforward";
    case ControllerMode::kNoRetract: return "no_retract";
  }
  return "unknown";
}

struct Scenario {
  EulerYPR initial_orientation;  // rad
  double height = 1.85;          // initial body CoM height, m
  Vec3 linear_velocity = Vec3::Zero();   // inertial
  Vec3 angular_velocity = Vec3::Zero();  // body frame
  ModelError model_error;
  double friction = 0.8;
  double timestep = 1e-3;
  double max_time = 3.0;
  ControllerMode mode = ControllerMode::kPlanned;
  UnitQuaternion target;
  double settle_rate = 0.2;      // rad/s
  double settle_window = 0.5;    // s
  double feet_window = 0.3;      // s after first touchdown
  double attitude_limit = deg2rad(10.0);

  void validate() const {
    if (!(height > 0.0)) throw std::invalid_argument("scenario height must be > 0");
    if (!(friction > 0.0)) throw std::invalid_argument("scenario friction must be > 0");
    if (!(timestep > 0.0)) throw std::invalid_argument("scenario timestep must be > 0");
    if (!(max_time > timestep)) throw std::invalid_argument("scenario max_time must exceed the timestep");
    if (!(settle_rate > 0.0 && settle_window > 0.0 && feet_window > 0.0 && attitude_limit > 0.0))
      throw std::invalid_argument("scenario landing thresholds must be > 0");
    model_error.validate();
  }
};

/// Planning-model state at release.
inline PlanningState initial_planning_state(const Scenario& s) {
  PlanningState x;
  x.p = Vec3{0.0, 0.0, s.height};
  x.orientation = quat_from_euler(s.initial_orientation);
  x.p_dot = s.linear_velocity;
  x.omega = s.angular_velocity;
  return x;
}

struct SimConfig {
  RobotParams params;  // nominal; model error is applied per scenario
  PhaseConfig phase;
  ContactModel contact;
};

struct TickRecord {
  double t = 0.0;
  SimState state;
  Eigen::Vector3d actuation = Eigen::Vector3d::Zero();  // pitch torque, yaw torque, length force
  double length_command = 0.0;
  std::array<Vec3, 4> foot_force{};
  std::array<double, 4> leg_compression{};
  std::array<bool, 4> contact{};
  std::array<double, 4> foot_penetration{};
  double body_penetration = 0.0;  // deepest non-foot point (<= 0 when clear)
  double vertical_accel = 0.0;
  Phase phase = Phase::kFlightReorient;
  double attitude_error = 0.0;
  double torque_cost = 0.0;
};

struct LandingVerdict {
  bool success = false;
  std::string failure_reason;
  double touchdown_time = std::numeric_limits<double>::quiet_NaN();
  EulerYPR touchdown_euler;  // rad
  double settle_time = std::numeric_limits<double>::quiet_NaN();
  double max_penetration = 0.0;       // feet
  double max_body_penetration = 0.0;  // non-foot points
  bool early_touchdown = false;
};

struct TrajectoryLog {
  std::vector<TickRecord> ticks;
  double trigger_height = 0.0;
  double flight_budget = 0.0;
  double retraction_time = std::numeric_limits<double>::quiet_NaN();
  bool aborted = false;
  std::string abort_reason;
  bool early_touchdown = false;
  bool out_of_range = false;
  double feet_window = 0.3;
  double settle_rate = 0.2;
  double settle_window = 0.5;
  double attitude_limit = deg2rad(10.0);
  LandingVerdict verdict;
};

namespace detail {

using LegVector = Eigen::Matrix<double, 4, 1>;

struct ContactEval {
  SimModel::VelocityVec generalized = SimModel::VelocityVec::Zero();
  LegVector compression_rate = LegVector::Zero();
  std::array<Vec3, 4> foot_force{};
  std::array<double, 4> foot_penetration{};
  double body_penetration = -std::numeric_limits<double>::infinity();
};

/// Non-foot points checked against the ground: hips and trunk corners.
inline std::vector<Vec3> body_contact_points(const RobotParams& p) {
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < 4; ++i) pts.push_back(p.hip_offset(i));
  const Vec3& h = p.body_half_extents;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) pts.push_back(Vec3{sx * h.x(), sy * h.y(), sz * h.z()});
  return pts;
}

/**
 * Ground interaction of the compliant legs, the trunk and the tail tip.
 *
 * Each leg is a massless spring-damper along body -z between its hip and a
 * point foot. Its compression rate follows from balancing the leg force
 * against the ground normal force along the leg (friction is left out of
 * this balance); the full ground force acts on the body at the foot.
 */
inline ContactEval evaluate_contacts(const SimModel& model, const SimState& x, const LegVector& compression,
                                     const PhaseConfig& legs, const ContactModel& ground,
                                     const std::vector<Vec3>& body_points) {
  const RobotParams& p = model.params();
  ContactEval out;
  const Mat3 r = x.orientation.matrix();
  const Vec3 axis = -r.col(2);              // hip to foot, world
  const Vec3 axis_rate = r * x.omega.cross(-Vec3::UnitZ());
  const double alpha = -axis.z();
  const SimModel::VelocityVec u = x.velocity();

  for (std::size_t i = 0; i < 4; ++i) {
    const Vec3 hip_b = p.hip_offset(i);
    const double s = compression(i);
    const double reach = p.leg_rest_length - s;
    const Vec3 hip = x.p + r * hip_b;
    const Vec3 hip_vel = x.p_dot + r * x.omega.cross(hip_b);
    const Vec3 foot = hip + reach * axis;
    const double depth = -foot.z();
    const double vz_rigid = hip_vel.z() + reach * axis_rate.z();
    const double w = hip_axial_rate(x.omega, hip_b);
    out.foot_penetration[i] = depth;

    double sdot = -legs.leg_stiffness * s / legs.leg_damping;
    double normal = 0.0;
    if (depth > 0.0 && alpha > 0.2) {
      const double k = ground.stiffness, c = ground.damping;
      double rate = (alpha * (k * depth - c * vz_rigid) - legs.leg_stiffness * s - legs.leg_angular_damping * w) /
                    (legs.leg_damping + alpha * alpha * c);
      double f = legs.leg_stiffness * s + legs.leg_damping * rate + legs.leg_angular_damping * w;
      if (f > legs.leg_force_max) {
        f = legs.leg_force_max;
        const double ddot = (f / alpha - k * depth) / c;
        rate = -(vz_rigid + ddot) / alpha;
      }
      if (f > 0.0) {
        sdot = rate;
        normal = f / alpha;
      }
    }
    out.compression_rate(i) = sdot;
    if (normal > 0.0) {
      const Vec3 foot_vel = hip_vel - sdot * axis + reach * axis_rate;
      Vec3 g = friction_force(foot_vel, normal, ground);
      g.z() = normal;
      out.foot_force[i] = g;
      const Vec3 foot_b = hip_b - reach * Vec3::UnitZ();
      out.generalized += model.body_point_jacobian(x, foot_b).transpose() * g;
    }
  }

  for (const Vec3& b : body_points) {
    const Vec3 pos = x.p + r * b;
    out.body_penetration = std::max(out.body_penetration, -pos.z());
    if (pos.z() >= 0.0) continue;
    const auto jac = model.body_point_jacobian(x, b);
    out.generalized += jac.transpose() * contact_force(pos, jac * u, ground);
  }
  const Vec3 tip = model.tail_tip_world(x);
  out.body_penetration = std::max(out.body_penetration, -tip.z());
  if (tip.z() < 0.0) {
    const auto jac = model.tail_tip_jacobian(x);
    out.generalized += jac.transpose() * contact_force(tip, jac * u, ground);
  }
  return out;
}

/// Forward dynamics with the prismatic joint held rigidly (its force is the constraint force).
inline SimModel::VelocityVec locked_length_dynamics(const SimModel& model, const SimState& x,
                                                    const Eigen::Vector3d& tau,
                                                    const SimModel::VelocityVec& external) {
  const SimModel::MassMatrix m = model.mass_matrix(x);
  const SimModel::VelocityVec rhs =
      SimModel::actuated(tau) + external - model.bias_forces(x) - model.gravity_forces(x);
  SimModel::VelocityVec acc = SimModel::VelocityVec::Zero();
  Eigen::LLT<Eigen::Matrix<double, 8, 8>> llt(m.topLeftCorner<8, 8>());
  if (llt.info() != Eigen::Success) throw std::runtime_error("mass matrix is not positive definite");
  acc.head<8>() = llt.solve(rhs.head<8>());
  return acc;
}

/// Inelastic end stop of the telescoping joint: the smallest impulse along the
/// joint that zeroes its rate. Momentum of the whole system is preserved.
inline void stop_length_joint(const SimModel& model, SimState& x) {
  const SimModel::MassMatrix m = model.mass_matrix(x);
  const Eigen::LDLT<SimModel::MassMatrix> ldlt(m);
  const SimModel::VelocityVec col = ldlt.solve(SimModel::VelocityVec::Unit(8));
  SimModel::VelocityVec u = x.velocity();
  u -= col * (u(8) / col(8));
  u(8) = 0.0;
  x.set_velocity(u);
}

inline double euler_error_bound(const EulerYPR& e) { return std::max(std::abs(e.roll), std::abs(e.pitch)); }

}  // namespace detail

/// Landing verdict from a completed log.
inline LandingVerdict score_landing(const TrajectoryLog& log) {
  LandingVerdict v;
  v.early_touchdown = log.early_touchdown;
  for (const auto& r : log.ticks) {
    for (double d : r.foot_penetration) v.max_penetration = std::max(v.max_penetration, d);
    v.max_body_penetration = std::max(v.max_body_penetration, r.body_penetration);
  }
  if (log.aborted) {
    v.failure_reason = "aborted: " + log.abort_reason;
    return v;
  }
  std::size_t td = log.ticks.size();
  for (std::size_t k = 0; k < log.ticks.size(); ++k) {
    const auto& c = log.ticks[k].contact;
    if (c[0] || c[1] || c[2] || c[3]) {
      td = k;
      break;
    }
  }
  if (td == log.ticks.size()) {
    v.failure_reason = "no touchdown";
    return v;
  }
  v.touchdown_time = log.ticks[td].t;
  bool attitude_ok = true;
  try {
    v.touchdown_euler = euler_from_quat(log.ticks[td].state.orientation);
    attitude_ok = detail::euler_error_bound(v.touchdown_euler) <= log.attitude_limit;
  } catch (const GimbalLockError&) {
    attitude_ok = false;
  }

  std::array<bool, 4> touched{};
  for (std::size_t k = td; k < log.ticks.size() && log.ticks[k].t <= v.touchdown_time + log.feet_window + 1e-12; ++k) {
    for (std::size_t i = 0; i < 4; ++i) touched[i] = touched[i] || log.ticks[k].contact[i];
  }
  const bool feet_ok = touched[0] && touched[1] && touched[2] && touched[3];

  // Start of the final run of ticks with |omega| below the threshold.
  double run_start = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = td; k < log.ticks.size(); ++k) {
    if (log.ticks[k].state.omega.norm() < log.settle_rate) {
      if (std::isnan(run_start)) run_start = log.ticks[k].t;
    } else {
      run_start = std::numeric_limits<double>::quiet_NaN();
    }
  }
  const bool settled = !std::isnan(run_start) && log.ticks.back().t - run_start >= log.settle_window - 1e-9;
  if (settled) v.settle_time = run_start;
  const bool body_ok = v.max_body_penetration <= 0.0;

  if (!attitude_ok) v.failure_reason = "attitude";
  else if (!feet_ok) v.failure_reason = "feet";
  else if (!body_ok) v.failure_reason = "body contact";
  else if (!settled) v.failure_reason = "not settled";
  v.success = v.failure_reason.empty();
  return v;
}

/**
 * Simulate a drop: tracking control in flight, tail retraction, then stance.
 * Control and physics run at the scenario timestep; one record per step.
 */
inline TrajectoryLog simulate(const Scenario& scenario, const TrackingPolicy& planned, const SimConfig& config) {
  scenario.validate();
  config.phase.validate();
  ContactModel ground = config.contact;
  ground.friction = scenario.friction;
  ground.validate();
  planned.validate();

  const RobotParams plant = inject_model_error(config.params, scenario.model_error);
  const SimModel model(plant);
  const PhaseConfig& pc = config.phase;
  const std::vector<Vec3> body_points = detail::body_contact_points(plant);
  const TrackingPolicy policy =
      scenario.mode == ControllerMode::kFeedforward ? planned.feedforward_only() : planned;
  const bool retract_enabled = scenario.mode != ControllerMode::kNoRetract;

  TrajectoryLog log;
  log.trigger_height = pc.trigger_height ? *pc.trigger_height
                                         : default_trigger_height(scenario.height, config.params, pc);
  log.flight_budget = policy.duration();
  log.feet_window = scenario.feet_window;
  log.settle_rate = scenario.settle_rate;
  log.settle_window = scenario.settle_window;
  log.attitude_limit = scenario.attitude_limit;

  SimState x = to_sim_state(initial_planning_state(scenario), plant.tail_length_max);
  detail::LegVector legs = detail::LegVector::Zero();
  PhaseState phase;
  bool length_locked = true;
  bool holding = false;
  Eigen::Vector2d hold_angles = Eigen::Vector2d::Zero();
  const double dt = scenario.timestep;
  const auto steps = static_cast<long>(std::ceil(scenario.max_time / dt - 1e-9));
  double prev_vz = x.p_dot.z();
  double below_since = std::numeric_limits<double>::quiet_NaN();
  double touchdown = std::numeric_limits<double>::quiet_NaN();
  log.ticks.reserve(static_cast<std::size_t>(steps) + 1);

  for (long k = 0; k <= steps; ++k) {
    const double t = k * dt;
    const detail::ContactEval now = detail::evaluate_contacts(model, x, legs, pc, ground, body_points);
    TickRecord rec;
    rec.t = t;
    rec.state = x;
    rec.foot_force = now.foot_force;
    rec.foot_penetration = now.foot_penetration;
    rec.body_penetration = now.body_penetration;
    rec.vertical_accel = k == 0 ? -plant.gravity : (x.p_dot.z() - prev_vz) / dt;
    prev_vz = x.p_dot.z();
    for (std::size_t i = 0; i < 4; ++i) {
      rec.leg_compression[i] = legs(i);
      rec.contact[i] = now.foot_penetration[i] > ground.penetration_tolerance;
    }

    const PlanningState xp = to_planning_state(x);
    PhaseInputs in;
    in.t = t;
    in.state = &xp;
    in.contact = rec.contact;
    in.target = scenario.target;
    in.trigger_height = log.trigger_height;
    in.flight_budget = log.flight_budget;
    in.tail_length = x.q_tail(2);
    const PhaseState next = step_phase(phase, in, pc);
    if (next.phase != phase.phase) {
      if (phase.phase == Phase::kFlightReorient) {
        log.retraction_time = t;
        if (retract_enabled) length_locked = false;
      }
      if (next.phase == Phase::kStance && std::isnan(touchdown)) touchdown = t;
      log.early_touchdown = log.early_touchdown || next.early_touchdown;
    }
    phase = next;

    // Telescoping joint: ramp command tracked by a saturated servo.
    Eigen::Vector3d act = Eigen::Vector3d::Zero();
    double length_rate = 0.0;
    rec.length_command = plant.tail_length_max;
    if (phase.retracting() && retract_enabled) {
      const double elapsed = t - phase.retraction_start_time;
      rec.length_command = retraction_command(elapsed, phase.retraction_start_length, plant.tail_length_min, pc);
      if (!length_locked) {
        length_rate = retraction_rate(elapsed, phase.retraction_start_length, plant.tail_length_min, pc);
        const double f = pc.length_servo_stiffness * (rec.length_command - x.q_tail(2)) +
                         pc.length_servo_damping * (length_rate - x.q_tail_dot(2));
        act(2) = std::clamp(f, -pc.retraction_force_limit, pc.retraction_force_limit);
      }
    }

    // Tail joints: planned feedback while reorienting, momentum-based attitude
    // steering while retracting (the plan assumed a fixed length), then a hold
    // of the touchdown angles on the ground.
    if (phase.phase == Phase::kFlightReorient) {
      const TrackingCommand cmd = tracking_control(t, xp, policy);
      log.out_of_range = log.out_of_range || cmd.out_of_range;
      act.head<2>() = cmd.torque;
    } else if (phase.phase == Phase::kFlightRetract) {
      act.head<2>() = retraction_attitude_control(model, x, scenario.target, length_rate, pc);
    } else {
      if (!holding) {
        holding = true;
        hold_angles = x.q_tail.head<2>();
      }
      const Eigen::Vector2d tau = pc.tail_hold_stiffness * (hold_angles - x.q_tail.head<2>()) -
                                  pc.tail_hold_damping * x.q_tail_dot.head<2>();
      act.head<2>() = tau.cwiseMax(plant.tail_torque_min).cwiseMin(plant.tail_torque_max);
    }
    rec.actuation = act;
    rec.phase = phase.phase;
    rec.attitude_error = attitude_error(scenario.target, x.orientation);
    rec.torque_cost = 0.5 * act.head<2>().squaredNorm();
    log.ticks.push_back(rec);

    // Stop once settled after touchdown and the feet window has elapsed.
    if (!std::isnan(touchdown)) {
      if (x.omega.norm() < scenario.settle_rate) {
        if (std::isnan(below_since)) below_since = t;
      } else {
        below_since = std::numeric_limits<double>::quiet_NaN();
      }
      if (!std::isnan(below_since) && t - below_since >= scenario.settle_window - 1e-9 &&
          t - touchdown >= scenario.feet_window) {
        break;
      }
    }
    if (k == steps) break;

    const auto advance = [&](SimState& s, detail::LegVector& l, double h, bool locked) {
      rk4_step<3, 4>(s, l, h,
                     [&](const SimState& y, const detail::LegVector& ly, SimState::Velocity& acc,
                         detail::LegVector& lrate) {
                       const detail::ContactEval c = detail::evaluate_contacts(model, y, ly, pc, ground, body_points);
                       acc = locked ? detail::locked_length_dynamics(model, y, act, c.generalized)
                                    : model.forward_dynamics(y, act, c.generalized);
                       lrate = c.compression_rate;
                     });
    };
    try {
      const SimState x_prev = x;
      const detail::LegVector legs_prev = legs;
      advance(x, legs, dt, length_locked);
      // Hard stops of the telescoping joint. The crossing is located inside
      // the step so the stop impulse is applied on the stop itself; the gear
      // then holds the tail once retracted.
      const bool below = x.q_tail(2) < plant.tail_length_min;
      const bool above = x.q_tail(2) > plant.tail_length_max;
      if (!length_locked && (below || above)) {
        const double stop = below ? plant.tail_length_min : plant.tail_length_max;
        double lo = 0.0, hi = dt;
        for (int it = 0; it < 60 && hi - lo > 1e-12 * dt; ++it) {
          const double mid = 0.5 * (lo + hi);
          SimState xs = x_prev;
          detail::LegVector ls = legs_prev;
          advance(xs, ls, mid, false);
          const bool crossed = below ? xs.q_tail(2) <= stop : xs.q_tail(2) >= stop;
          (crossed ? hi : lo) = mid;
        }
        x = x_prev;
        legs = legs_prev;
        advance(x, legs, hi, false);
        x.q_tail(2) = stop;
        detail::stop_length_joint(model, x);
        if (below) length_locked = true;
        if (hi < dt) advance(x, legs, dt - hi, length_locked);
      }
    } catch (const std::exception& e) {
      log.aborted = true;
      log.abort_reason = std::string("dynamics failure at t=") + std::to_string(t) + ": " + e.what();
      break;
    }
    if (!x.all_finite() || !legs.allFinite()) {
      log.aborted = true;
      log.abort_reason = "non-finite state at t=" + std::to_string(t + dt);
      break;
    }
    // Residual overshoot from a second crossing within one step.
    if (x.q_tail(2) < plant.tail_length_min) {
      x.q_tail(2) = plant.tail_length_min;
      if (x.q_tail_dot(2) < 0.0) detail::stop_length_joint(model, x);
      length_locked = true;
    } else if (x.q_tail(2) > plant.tail_length_max) {
      x.q_tail(2) = plant.tail_length_max;
      if (x.q_tail_dot(2) > 0.0) detail::stop_length_joint(model, x);
    }
  }
  log.verdict = score_landing(log);
  return log;
}

struct BatchRow {
  Scenario scenario;
  bool plan_converged = false;
  int plan_iterations = 0;
  double plan_terminal_error = 0.0;
  double plan_seconds = 0.0;
  LandingVerdict verdict;
  bool aborted = false;
};

struct BatchSummary {
  std::vector<BatchRow> rows;
  int successes = 0;
  int plan_failures = 0;
  double success_rate() const { return rows.empty() ? 0.0 : static_cast<double>(successes) / rows.size(); }
};

/// Planning problem for a scenario with the given flight budget.
inline OCProblem make_problem(const Scenario& scenario, const RobotParams& nominal, double budget, double knot_dt,
                              const OCProblem& weights = OCProblem{}) {
  OCProblem p = weights;
  p.model = PlanningModel(nominal);
  p.x0 = initial_planning_state(scenario);
  p.dt = knot_dt;
  p.horizon = std::max(1, static_cast<int>(std::lround(budget / knot_dt)));
  p.target = scenario.target;
  return p;
}

struct PlannerConfig {
  SolverSettings solver;
  OCProblem weights = rest_terminal_weights();  // cost weights and constraint switches
  double budget = 0.4;    // s
  double knot_dt = 0.002; // s
};

/// Plan and simulate one scenario.
inline BatchRow run_scenario(const Scenario& scenario, const PlannerConfig& planner, const SimConfig& config,
                             TrajectoryLog* log_out = nullptr) {
  BatchRow row;
  row.scenario = scenario;
  const OCProblem problem = make_problem(scenario, config.params, planner.budget, planner.knot_dt, planner.weights);
  const auto t0 = std::chrono::steady_clock::now();
  const PlanningSolution sol = solve(problem, planner.solver);
  row.plan_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  row.plan_converged = sol.converged;
  row.plan_iterations = sol.iterations;
  row.plan_terminal_error = attitude_error(problem.target, sol.states.back().orientation);
  TrajectoryLog log = simulate(scenario, TrackingPolicy(sol, problem.dt, config.params), config);
  row.verdict = log.verdict;
  row.aborted = log.aborted;
  if (log_out) *log_out = std::move(log);
  return row;
}

/**
 * Plan and simulate every scenario. Rows keep the input order and each
 * scenario is computed independently, so results do not depend on `jobs`.
 */
inline BatchSummary batch_run(const std::vector<Scenario>& grid, const PlannerConfig& planner, const SimConfig& config,
                              int jobs = 1) {
  if (grid.empty()) throw std::invalid_argument("batch grid is empty");
  BatchSummary out;
  out.rows.resize(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  const auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < grid.size(); i += stride) {
      try {
        out.rows[i] = run_scenario(grid[i], planner, config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = static_cast<std::size_t>(std::clamp(jobs, 1, static_cast<int>(grid.size())));
  if (n == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < n; ++j) pool.emplace_back(work, j, n);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (const auto& r : out.rows) {
    out.successes += r.verdict.success ? 1 : 0;
    out.plan_failures += r.plan_converged ? 0 : 1;
  }
  return out;
}

/// yaw x pitch x roll grid (degrees in, radians stored).
inline std::vector<Scenario> orientation_grid(const std::vector<double>& yaw_deg, const std::vector<double>& pitch_deg,
                                              const std::vector<double>& roll_deg, const Scenario& base) {
  std::vector<Scenario> grid;
  for (double y : yaw_deg)
    for (double p : pitch_deg)
      for (double r : roll_deg) {
        Scenario s = base;
        s.initial_orientation = euler_deg(y, p, r);
        grid.push_back(s);
      }
  return grid;
}

}  // namespace falltail

#endif  // FALLTAIL_SIM_HPP_
