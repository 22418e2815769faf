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

#ifndef FALLTAIL_MODEL_HPP_
#define FALLTAIL_MODEL_HPP_

#include <Eigen/Cholesky>
#include <algorithm>
#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

#include "falltail/params.hpp"
#include "falltail/spatial.hpp"

namespace falltail {

/**
 * Floating-base state q_f = [p, Theta, q_t], u_f = [p_dot, omega, q_t_dot].
 *
 * p and p_dot are the body CoM position/velocity in the inertial frame,
 * omega is expressed in the body frame. q_tail is [pitch, yaw] for the
 * planning model and [pitch, yaw, length] for the simulation model.
 */
template <int TailDofs>
struct SystemState {
  static_assert(TailDofs == 2 || TailDofs == 3);
  static constexpr int kTailDofs = TailDofs;
  static constexpr int kNv = 6 + TailDofs;
  using TailVec = Eigen::Matrix<double, TailDofs, 1>;
  using Velocity = Eigen::Matrix<double, kNv, 1>;

  Vec3 p = Vec3::Zero();
  UnitQuaternion orientation;
  TailVec q_tail = TailVec::Zero();
  Vec3 p_dot = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
  TailVec q_tail_dot = TailVec::Zero();

  Velocity velocity() const {
    Velocity u;
    u << p_dot, omega, q_tail_dot;
    return u;
  }
  void set_velocity(const Velocity& u) {
    p_dot = u.template head<3>();
    omega = u.template segment<3>(3);
    q_tail_dot = u.template tail<TailDofs>();
  }
  bool all_finite() const {
    return p.allFinite() && orientation.xyzw().allFinite() && q_tail.allFinite() &&
           p_dot.allFinite() && omega.allFinite() && q_tail_dot.allFinite();
  }
};

using PlanningState = SystemState<2>;
using SimState = SystemState<3>;

/// Unit tail direction in the body frame. Positive pitch swings the tip
/// towards body -z; yaw rotates about body z. Zero is body -x.
inline Vec3 tail_direction(double pitch, double yaw) {
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  return {-cp * cy, -cp * sy, -sp};
}

/// Tip position relative to the body CoM, body frame.
inline Vec3 tail_tip_position(const RobotParams& params, double pitch, double yaw, double length) {
  return params.tail_mount_offset + length * tail_direction(pitch, yaw);
}

/// Angle between the tail and its rest direction beyond the cone half-angle.
inline double workspace_violation(const RobotParams& params, double pitch, double yaw) {
  const double c = std::clamp(std::cos(pitch) * std::cos(yaw), -1.0, 1.0);
  return std::max(0.0, std::acos(c) - params.tail_workspace_half_angle);
}

/// Smooth form of the cone constraint used by the optimizer, <= 0 when feasible.
inline double workspace_constraint(const RobotParams& params, double pitch, double yaw) {
  return std::cos(params.tail_workspace_half_angle) - std::cos(pitch) * std::cos(yaw);
}

template <int TailDofs>
class TailedRobotModel {
 public:
  static constexpr int kTailDofs = TailDofs;
  static constexpr int kNv = 6 + TailDofs;
  using State = SystemState<TailDofs>;
  using TailVec = typename State::TailVec;
  using VelocityVec = Eigen::Matrix<double, kNv, 1>;
  using MassMatrix = Eigen::Matrix<double, kNv, kNv>;
  using ActuatorForce = Eigen::Matrix<double, TailDofs, 1>;
  using PointJacobian = Eigen::Matrix<double, 3, kNv>;

  explicit TailedRobotModel(const RobotParams& params) : params_(params) { params_.validate(); }

  const RobotParams& params() const { return params_; }
  double total_mass() const { return params_.total_mass(); }

  double tail_length(const State& x) const {
    if constexpr (TailDofs == 3) {
      return x.q_tail[2];
    } else {
      return params_.tail_length_max;
    }
  }

  /// Body-frame tail quantities at the current joint state.
  struct TailKinematics {
    Vec3 tip;                                   // relative to body CoM
    Eigen::Matrix<double, 3, TailDofs> jac;     // d tip / d q_tail
    Eigen::Matrix<double, 3, TailDofs> jac_rot; // relative angular velocity per joint rate
    Vec3 tip_bias;                              // sum_ij d2 tip/dqi dqj qdot_i qdot_j
    Vec3 rot_bias;                              // d/dt(jac_rot) qdot
  };

  TailKinematics tail_kinematics(const State& x) const {
    const double pitch = x.q_tail[0], yaw = x.q_tail[1];
    const double len = tail_length(x);
    const double cp = std::cos(pitch), sp = std::sin(pitch);
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    const double dp = x.q_tail_dot[0], dy = x.q_tail_dot[1];

    TailKinematics k;
    const Vec3 dir{-cp * cy, -cp * sy, -sp};
    const Vec3 d_pitch{sp * cy, sp * sy, -cp};
    const Vec3 d_yaw{cp * sy, -cp * cy, 0.0};
    k.tip = params_.tail_mount_offset + len * dir;
    k.jac.col(0) = len * d_pitch;
    k.jac.col(1) = len * d_yaw;
    k.jac_rot.col(0) = Vec3{sy, -cy, 0.0};
    k.jac_rot.col(1) = Vec3::UnitZ();

    const Vec3 d_pp{cp * cy, cp * sy, sp};
    const Vec3 d_py{-sp * sy, sp * cy, 0.0};
    const Vec3 d_yy{cp * cy, cp * sy, 0.0};
    k.tip_bias = len * (d_pp * dp * dp + 2.0 * d_py * dp * dy + d_yy * dy * dy);
    k.rot_bias = dp * dy * Vec3{cy, sy, 0.0};
    if constexpr (TailDofs == 3) {
      const double dl = x.q_tail_dot[2];
      k.jac.col(2) = dir;
      k.jac_rot.col(2).setZero();
      k.tip_bias += 2.0 * dl * (d_pitch * dp + d_yaw * dy);
    }
    return k;
  }

  /// Inertial-frame Jacobian of the tail tip velocity w.r.t. u_f.
  PointJacobian tail_tip_jacobian(const State& x) const {
    return tail_tip_jacobian(x, tail_kinematics(x));
  }

  /// Inertial-frame Jacobian of a point rigidly attached to the body.
  PointJacobian body_point_jacobian(const State& x, const Vec3& body_point) const {
    const Mat3 r = x.orientation.matrix();
    PointJacobian j = PointJacobian::Zero();
    j.template leftCols<3>().setIdentity();
    j.template middleCols<3>(3) = -r * skew(body_point);
    return j;
  }

  MassMatrix mass_matrix(const State& x) const {
    const TailKinematics k = tail_kinematics(x);
    return mass_matrix(x, k);
  }

  /// Coriolis and centrifugal terms b_f.
  VelocityVec bias_forces(const State& x) const {
    const TailKinematics k = tail_kinematics(x);
    return bias_forces(x, k);
  }

  /// Gravity terms g_f (left-hand side convention).
  VelocityVec gravity_forces(const State& x) const {
    return gravity_forces(x, tail_kinematics(x));
  }

  /// Solves M u_dot + b + g = S^T tau + external for u_dot. `external` is a
  /// generalized force, e.g. J^T F for a contact force F.
  VelocityVec forward_dynamics(const State& x, const ActuatorForce& tau,
                               const VelocityVec& external = VelocityVec::Zero()) const {
    const TailKinematics k = tail_kinematics(x);
    const MassMatrix m = mass_matrix(x, k);
    const VelocityVec rhs = actuated(tau) + external - bias_forces(x, k) - gravity_forces(x, k);
    Eigen::LLT<MassMatrix> llt(m);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("mass matrix is not positive definite");
    }
    return llt.solve(rhs);
  }

  /// M u_dot + b + g; actuated rows hold joint forces, base rows the residual wrench.
  VelocityVec inverse_dynamics(const State& x, const VelocityVec& accel) const {
    const TailKinematics k = tail_kinematics(x);
    return mass_matrix(x, k) * accel + bias_forces(x, k) + gravity_forces(x, k);
  }

  /// S^T tau with S = [0 I].
  static VelocityVec actuated(const ActuatorForce& tau) {
    VelocityVec f = VelocityVec::Zero();
    f.template tail<TailDofs>() = tau;
    return f;
  }

  Vec3 tail_tip_world(const State& x) const {
    return x.p + x.orientation.rotate(tail_kinematics(x).tip);
  }

  Vec3 tail_tip_velocity(const State& x) const { return tail_tip_jacobian(x) * x.velocity(); }

  Vec3 system_com(const State& x) const {
    return (params_.body_mass * x.p + params_.tail_mass * tail_tip_world(x)) / total_mass();
  }

  Vec3 system_com_velocity(const State& x) const {
    return (params_.body_mass * x.p_dot + params_.tail_mass * tail_tip_velocity(x)) / total_mass();
  }

  Vec3 system_com_acceleration(const State& x, const VelocityVec& accel) const {
    const TailKinematics k = tail_kinematics(x);
    const Vec3 tip_acc = tail_tip_jacobian(x, k) * accel + tip_bias_acceleration(x, k);
    return (params_.body_mass * accel.template head<3>() + params_.tail_mass * tip_acc) /
           total_mass();
  }

  /// Total angular momentum about the instantaneous system CoM, inertial frame.
  Vec3 angular_momentum_about_com(const State& x) const {
    const TailKinematics k = tail_kinematics(x);
    const Mat3 r = x.orientation.matrix();
    const Vec3 c = system_com(x);
    const Vec3 tip = x.p + r * k.tip;
    const Vec3 tip_vel = tail_tip_jacobian(x, k) * x.velocity();
    const Vec3 tip_omega = x.omega + k.jac_rot * x.q_tail_dot;
    return r * (params_.body_inertia.asDiagonal() * x.omega) +
           params_.body_mass * (x.p - c).cross(x.p_dot) +
           params_.tail_mass * (tip - c).cross(tip_vel) +
           params_.tail_tip_inertia * (r * tip_omega);
  }

  double kinetic_energy(const State& x) const {
    const VelocityVec u = x.velocity();
    return 0.5 * u.dot(mass_matrix(x) * u);
  }

 private:
  PointJacobian tail_tip_jacobian(const State& x, const TailKinematics& k) const {
    const Mat3 r = x.orientation.matrix();
    PointJacobian j;
    j.template leftCols<3>().setIdentity();
    j.template middleCols<3>(3) = -r * skew(k.tip);
    j.template rightCols<TailDofs>() = r * k.jac;
    return j;
  }

  Vec3 tip_bias_acceleration(const State& x, const TailKinematics& k) const {
    const Vec3& w = x.omega;
    const Vec3 rel_vel = k.jac * x.q_tail_dot;
    return x.orientation.rotate(w.cross(w.cross(k.tip)) + 2.0 * w.cross(rel_vel) + k.tip_bias);
  }

  MassMatrix mass_matrix(const State& x, const TailKinematics& k) const {
    MassMatrix m = MassMatrix::Zero();
    m.template topLeftCorner<3, 3>().diagonal().setConstant(params_.body_mass);
    m.template block<3, 3>(3, 3).diagonal() = params_.body_inertia;
    const PointJacobian jt = tail_tip_jacobian(x, k);
    m.noalias() += params_.tail_mass * jt.transpose() * jt;
    Eigen::Matrix<double, 3, kNv> jr = Eigen::Matrix<double, 3, kNv>::Zero();
    jr.template middleCols<3>(3).setIdentity();
    jr.template rightCols<TailDofs>() = k.jac_rot;
    m.noalias() += params_.tail_tip_inertia * jr.transpose() * jr;
    return m;
  }

  VelocityVec bias_forces(const State& x, const TailKinematics& k) const {
    const Vec3& w = x.omega;
    VelocityVec b = VelocityVec::Zero();
    b.template segment<3>(3) = w.cross(params_.body_inertia.asDiagonal() * w);
    b.noalias() += params_.tail_mass * tail_tip_jacobian(x, k).transpose() *
                   tip_bias_acceleration(x, k);
    const Vec3 rel_omega = k.jac_rot * x.q_tail_dot;
    const Vec3 tip_alpha_bias = k.rot_bias + w.cross(rel_omega);
    b.template segment<3>(3) += params_.tail_tip_inertia * tip_alpha_bias;
    b.template tail<TailDofs>() += params_.tail_tip_inertia * k.jac_rot.transpose() * tip_alpha_bias;
    return b;
  }

  VelocityVec gravity_forces(const State& x, const TailKinematics& k) const {
    const Vec3 g{0.0, 0.0, -params_.gravity};
    VelocityVec f = VelocityVec::Zero();
    f.template head<3>() = -params_.body_mass * g;
    f.noalias() -= params_.tail_mass * tail_tip_jacobian(x, k).transpose() * g;
    return f;
  }

  RobotParams params_;
};

using PlanningModel = TailedRobotModel<2>;
using SimModel = TailedRobotModel<3>;

/// 8-DoF model with the tail locked at its maximum length.
inline PlanningModel build_planning_model(const RobotParams& params) { return PlanningModel(params); }

/// 9-DoF model with the telescoping joint free.
inline SimModel build_sim_model(const RobotParams& params) { return SimModel(params); }

/// Sim state restricted to the planning coordinates (length dropped).
inline PlanningState to_planning_state(const SimState& x) {
  PlanningState y;
  y.p = x.p;
  y.orientation = x.orientation;
  y.q_tail = x.q_tail.head<2>();
  y.p_dot = x.p_dot;
  y.omega = x.omega;
  y.q_tail_dot = x.q_tail_dot.head<2>();
  return y;
}

inline SimState to_sim_state(const PlanningState& x, double length, double length_rate = 0.0) {
  SimState y;
  y.p = x.p;
  y.orientation = x.orientation;
  y.q_tail << x.q_tail, length;
  y.p_dot = x.p_dot;
  y.omega = x.omega;
  y.q_tail_dot << x.q_tail_dot, length_rate;
  return y;
}

}  // namespace falltail

#endif  // FALLTAIL_MODEL_HPP_
