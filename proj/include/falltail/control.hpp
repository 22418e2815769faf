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

#ifndef FALLTAIL_CONTROL_HPP_
#define FALLTAIL_CONTROL_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "falltail/trajopt.hpp"

namespace falltail {

enum class Phase { kFlightReorient = 0, kFlightRetract = 1, kStance = 2 };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::kFlightReorient: return "FLIGHT_REORIENT";
    case Phase::kFlightRetract: return "FLIGHT_RETRACT";
    case Phase::kStance: return "STANCE";
  }
  return "UNKNOWN";
}

struct PhaseConfig {
  double attitude_tolerance = 0.015;
  /// Retraction trigger height h_s (m). Empty: derived from the drop height
  /// so the ramp finishes `retraction_margin` before touchdown.
  std::optional<double> trigger_height;
  double retraction_margin = 0.05;  // s
  double retraction_speed = 2.0;    // m/s
  double retraction_force_limit = 100.0;  // N
  double length_servo_stiffness = 7.8e4;  // N/m
  double length_servo_damping = 440.0;    // N s/m
  double tail_hold_stiffness = 20.0;      // N m/rad
  double tail_hold_damping = 2.0;         // N m s/rad
  double retract_attitude_gain = 20.0;    // 1/s, body rate demanded per radian of attitude error
  double retract_rate_gain = 5.0;         // N m s/rad, tail joint rate servo
  double retract_rate_limit = 20.0;       // rad/s, cap on demanded tail joint rates
  double retract_cone_margin = 0.0;       // rad inside the workspace cone where outward rates are removed
  double leg_stiffness = 5000.0;          // N/m
  double leg_damping = 300.0;             // N s/m
  double leg_angular_damping = 200.0;     // N s/m on the hip's rotational velocity along the leg
  double leg_force_max = 2000.0;          // N
  double accel_jump_threshold = 2.0 * 9.81;  // m/s^2 per tick

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("invalid phase config: ") + what);
    };
    require(attitude_tolerance > 0.0, "attitude_tolerance must be > 0");
    require(!trigger_height || *trigger_height > 0.0, "trigger_height must be > 0");
    require(retraction_margin >= 0.0, "retraction_margin must be >= 0");
    require(retraction_speed > 0.0, "retraction_speed must be > 0");
    require(retraction_force_limit > 0.0, "retraction_force_limit must be > 0");
    require(length_servo_stiffness > 0.0 && length_servo_damping > 0.0, "length servo gains must be > 0");
    require(tail_hold_stiffness > 0.0 && tail_hold_damping > 0.0, "tail hold gains must be > 0");
    require(retract_attitude_gain >= 0.0 && retract_rate_gain > 0.0, "retraction attitude gains must be valid");
    require(retract_rate_limit > 0.0 && retract_cone_margin >= 0.0, "retraction rate limits must be valid");
    require(leg_stiffness > 0.0 && leg_damping > 0.0, "leg gains must be > 0");
    require(leg_angular_damping >= 0.0, "leg_angular_damping must be >= 0");
    require(leg_force_max > 0.0, "leg_force_max must be > 0");
    require(accel_jump_threshold > 0.0, "accel_jump_threshold must be > 0");
  }
};

struct PhaseState {
  Phase phase = Phase::kFlightReorient;
  double entry_time = 0.0;
  double retraction_start_length = 0.0;
  double retraction_start_time = 0.0;
  bool early_touchdown = false;

  bool retracting() const { return phase != Phase::kFlightReorient; }
};

/// Time-varying linear feedback around a planned trajectory.
struct TrackingPolicy {
  std::vector<PlanningState> states;
  std::vector<TailTorque> controls;
  std::vector<PlanningGain> gains;
  double dt = 0.002;
  double torque_min = -6.0;
  double torque_max = 6.0;

  TrackingPolicy() = default;
  TrackingPolicy(const PlanningSolution& sol, double knot_dt, const RobotParams& params)
      : states(sol.states), controls(sol.controls), gains(sol.gains), dt(knot_dt),
        torque_min(params.tail_torque_min), torque_max(params.tail_torque_max) {
    validate();
  }

  int knots() const { return static_cast<int>(controls.size()); }
  double duration() const { return knots() * dt; }

  void validate() const {
    if (controls.empty()) throw std::invalid_argument("tracking policy needs at least one knot");
    if (states.size() != controls.size() + 1 || gains.size() != controls.size())
      throw std::invalid_argument("tracking policy needs N+1 states, N controls and N gains");
    if (!(dt > 0.0)) throw std::invalid_argument("tracking policy dt must be > 0");
    if (!(torque_min < torque_max)) throw std::invalid_argument("tracking policy torque limits inverted");
  }

  /// Same references with the feedback removed.
  TrackingPolicy feedforward_only() const {
    TrackingPolicy p = *this;
    for (auto& k : p.gains) k.setZero();
    return p;
  }

  /// Reference state at time t, linearly interpolated between knots.
  PlanningState reference(double t) const {
    const int n = knots();
    const double s = std::clamp(t / dt, 0.0, static_cast<double>(n));
    const int i = std::min(static_cast<int>(std::floor(s)), n - 1);
    const double frac = s - i;
    return state_retract(states[i], frac * state_difference(states[i], states[i + 1]));
  }
};

struct TrackingCommand {
  TailTorque torque = TailTorque::Zero();
  bool out_of_range = false;
};

/**
 * tau = tau_ref(t) + K_k (x - x_ref(t)), clamped to the torque limits.
 * tau_ref is held over each knot interval, x_ref is interpolated, and K is
 * taken from the nearest knot. The orientation error is the body-side
 * rotation vector from the reference to the current attitude.
 */
inline TrackingCommand tracking_control(double t, const PlanningState& x, const TrackingPolicy& policy) {
  TrackingCommand cmd;
  const int n = policy.knots();
  const double horizon = policy.duration();
  if (t < 0.0 || t > horizon + 1e-12) cmd.out_of_range = true;
  const double tc = std::clamp(t, 0.0, horizon);
  const int hold = std::min(static_cast<int>(std::floor(tc / policy.dt + 1e-9)), n - 1);
  const int nearest = std::min(static_cast<int>(std::lround(tc / policy.dt)), n - 1);
  const PlanningState ref = policy.reference(tc);
  const TailTorque tau = policy.controls[hold] + policy.gains[nearest] * state_difference(ref, x);
  cmd.torque = tau.cwiseMax(policy.torque_min).cwiseMin(policy.torque_max);
  return cmd;
}

/**
 * Tail pitch/yaw torques that steer the body toward `target` while the tail
 * retracts. The angular momentum about the system CoM is linear in the
 * generalized velocity; the joint rates are chosen (least squares) so the
 * body rate becomes -k * rotation error given the commanded length rate,
 * and a rate servo drives the joints there. Torques are saturated.
 */
inline TailTorque retraction_attitude_control(const SimModel& model, const SimState& x, const UnitQuaternion& target,
                                              double length_rate_command, const PhaseConfig& config) {
  Eigen::Matrix<double, 3, SimModel::kNv> a;
  for (int i = 0; i < SimModel::kNv; ++i) {
    SimState unit = x;
    unit.set_velocity(SimModel::VelocityVec::Unit(i));
    a.col(i) = model.angular_momentum_about_com(unit);
  }
  const Vec3 omega_des = -config.retract_attitude_gain * rotation_difference(target, x.orientation);
  const Vec3 mismatch = a.middleCols<3>(3) * (omega_des - x.omega) +
                        a.col(8) * (length_rate_command - x.q_tail_dot(2));
  const Eigen::Matrix<double, 3, 2> aq = a.middleCols<2>(6);
  Eigen::Vector2d rate = x.q_tail_dot.head<2>() - aq.completeOrthogonalDecomposition().solve(mismatch);
  // Large swing rates stall the telescoping servo through centrifugal load.
  const double peak = rate.cwiseAbs().maxCoeff();
  if (peak > config.retract_rate_limit) rate *= config.retract_rate_limit / peak;
  // Near the edge of the workspace cone drop outward motion and push back inside.
  const RobotParams& p = model.params();
  const double pitch = x.q_tail(0), yaw = x.q_tail(1);
  const double angle = std::acos(std::clamp(std::cos(pitch) * std::cos(yaw), -1.0, 1.0));
  const Eigen::Vector2d outward(std::sin(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw));
  const double edge = p.tail_workspace_half_angle - config.retract_cone_margin;
  if (angle > edge && outward.squaredNorm() > 1e-12) {
    const Eigen::Vector2d n = outward.normalized();
    rate -= n * std::max(0.0, rate.dot(n));
    rate -= n * (config.retract_rate_limit * std::min(1.0, (angle - edge) / std::max(config.retract_cone_margin, 1e-6)));
  }
  const TailTorque tau = config.retract_rate_gain * (rate - x.q_tail_dot.head<2>());
  return tau.cwiseMax(p.tail_torque_min).cwiseMin(p.tail_torque_max);
}

/// CoM height at which retraction starts so the ramp ends `margin` before the
/// feet reach the ground, for a fall from rest at `drop_height`.
inline double default_trigger_height(double drop_height, const RobotParams& params, const PhaseConfig& config) {
  double foot_depth = 0.0;
  for (const auto& f : params.foot_offsets) foot_depth = std::max(foot_depth, -f.z());
  const double fall = std::max(0.0, drop_height - foot_depth);
  const double t_touch = params.gravity > 0.0 ? std::sqrt(2.0 * fall / params.gravity) : 0.0;
  const double ramp = (params.tail_length_max - params.tail_length_min) / config.retraction_speed;
  const double t_trigger = std::max(0.0, t_touch - ramp - config.retraction_margin);
  return drop_height - 0.5 * params.gravity * t_trigger * t_trigger;
}

inline bool should_retract(double t, const PlanningState& x, const UnitQuaternion& target, double trigger_height,
                           double flight_budget, const PhaseConfig& config) {
  return attitude_error(target, x.orientation) < config.attitude_tolerance || x.p.z() < trigger_height ||
         t >= flight_budget;
}

/// Length command `elapsed` seconds after the retraction trigger.
inline double retraction_command(double elapsed, double start_length, double min_length, const PhaseConfig& config) {
  return std::max(min_length, start_length - config.retraction_speed * std::max(0.0, elapsed));
}

/// Rate of the retraction command (zero once the ramp is complete).
inline double retraction_rate(double elapsed, double start_length, double min_length, const PhaseConfig& config) {
  return retraction_command(elapsed, start_length, min_length, config) > min_length ? -config.retraction_speed : 0.0;
}

/// Axial force of one compliant virtual leg (pushing the body away from the foot).
inline double leg_force(double compression, double compression_rate, double hip_axial_rate, const PhaseConfig& config) {
  const double f = config.leg_stiffness * compression + config.leg_damping * compression_rate +
                   config.leg_angular_damping * hip_axial_rate;
  return std::clamp(f, 0.0, config.leg_force_max);
}

/// Velocity of hip i toward its foot caused by body rotation alone.
inline double hip_axial_rate(const Vec3& omega_body, const Vec3& hip_offset) {
  return -(omega_body.cross(hip_offset)).z();
}

struct LegState {
  double compression = 0.0;
  double compression_rate = 0.0;
};

inline std::array<double, 4> stance_control(const SimState& x, const std::array<LegState, 4>& legs,
                                            const RobotParams& params, const PhaseConfig& config) {
  std::array<double, 4> f{};
  for (std::size_t i = 0; i < 4; ++i) {
    f[i] = leg_force(legs[i].compression, legs[i].compression_rate, hip_axial_rate(x.omega, params.hip_offset(i)),
                     config);
  }
  return f;
}

struct PhaseInputs {
  double t = 0.0;
  const PlanningState* state = nullptr;
  std::array<bool, 4> contact{};
  UnitQuaternion target;
  double trigger_height = 0.0;
  double flight_budget = 0.0;
  double tail_length = 0.0;
};

/// Advance the phase machine; phases only move forward.
inline PhaseState step_phase(const PhaseState& current, const PhaseInputs& in, const PhaseConfig& config) {
  if (in.state == nullptr) throw std::invalid_argument("step_phase needs a state");
  PhaseState next = current;
  const bool any_contact = std::any_of(in.contact.begin(), in.contact.end(), [](bool c) { return c; });
  switch (current.phase) {
    case Phase::kFlightReorient:
      if (any_contact) {
        next.phase = Phase::kStance;
        next.entry_time = in.t;
        next.early_touchdown = true;
        next.retraction_start_length = in.tail_length;
        next.retraction_start_time = in.t;
      } else if (should_retract(in.t, *in.state, in.target, in.trigger_height, in.flight_budget, config)) {
        next.phase = Phase::kFlightRetract;
        next.entry_time = in.t;
        next.retraction_start_length = in.tail_length;
        next.retraction_start_time = in.t;
      }
      break;
    case Phase::kFlightRetract:
      if (any_contact) {
        next.phase = Phase::kStance;
        next.entry_time = in.t;
      }
      break;
    case Phase::kStance:
      break;
  }
  return next;
}

}  // namespace falltail

#endif  // FALLTAIL_CONTROL_HPP_
