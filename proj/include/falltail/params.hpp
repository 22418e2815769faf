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

#ifndef FALLTAIL_PARAMS_HPP_
#define FALLTAIL_PARAMS_HPP_

#include <array>
#include <stdexcept>
#include <string>

#include "falltail/spatial.hpp"

namespace falltail {

class InvalidParams : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * Inertial and geometric parameters of the body + morphable tail.
 *
 * The tail is a massless telescoping link behind a pitch/yaw gimbal with its
 * mass lumped at the tip. The tip mass also carries a small isotropic rotary
 * inertia so that the yaw joint keeps a non-zero inertia when the tail points
 * along the body z axis. The tail base package and linkage are lumped into
 * the body.
 *
 * The mount offset, torque limits, workspace half-angle, tip inertia and
 * leg geometry are estimates; override them from the config file.
 */
struct RobotParams {
  double body_mass = 12.45;                     // kg
  Vec3 body_inertia{0.12, 0.39, 0.45};          // kg m^2, principal, body frame
  double tail_mass = 1.25;                      // kg
  double tail_tip_inertia = 1e-3;               // kg m^2, isotropic, about the tip
  double tail_length_min = 0.12;                // m
  double tail_length_max = 0.49;                // m
  Vec3 tail_mount_offset{-0.15, 0.0, 0.05};     // m, body frame, from body CoM
  double tail_torque_min = -6.0;                // N m, per joint
  double tail_torque_max = 6.0;                 // N m, per joint
  double tail_workspace_half_angle = deg2rad(120.0);
  double gravity = 9.81;                        // m/s^2
  std::array<Vec3, 4> foot_offsets{Vec3{0.18, 0.13, -0.27}, Vec3{0.18, -0.13, -0.27},
                                   Vec3{-0.18, 0.13, -0.27}, Vec3{-0.18, -0.13, -0.27}};
  double leg_rest_length = 0.22;                // m, hip to foot along body -z
  Vec3 body_half_extents{0.1335, 0.097, 0.057}; // m, trunk box used for ground contact

  /// Tailed A1 robot.
  static RobotParams tailed_a1() { return {}; }

  /// Flight-phase test platform (cuboid body with the same tail).
  static RobotParams test_platform() {
    RobotParams p;
    p.body_mass = 11.5;
    p.body_inertia = Vec3{0.05, 0.25, 0.22};
    return p;
  }

  double total_mass() const { return body_mass + tail_mass; }

  /// Hip i sits leg_rest_length above the nominal foot point along body z.
  Vec3 hip_offset(std::size_t i) const {
    return foot_offsets.at(i) + Vec3{0.0, 0.0, leg_rest_length};
  }

  /// Throws InvalidParams naming the first violated invariant.
  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw InvalidParams(std::string("invalid robot parameters: ") + what);
    };
    require(body_mass > 0.0, "body_mass must be > 0");
    require(body_inertia.minCoeff() > 0.0, "body_inertia entries must be > 0");
    require(tail_mass >= 0.0, "tail_mass must be >= 0");
    require(tail_tip_inertia >= 0.0, "tail_tip_inertia must be >= 0");
    require(tail_mass > 0.0 || tail_tip_inertia > 0.0,
            "tail needs a tip mass or a tip inertia");
    require(tail_length_min > 0.0 && tail_length_min < tail_length_max,
            "need 0 < tail_length_min < tail_length_max");
    require(tail_torque_min < 0.0 && tail_torque_max > 0.0,
            "need tail_torque_min < 0 < tail_torque_max");
    require(tail_workspace_half_angle > 0.0 && tail_workspace_half_angle < std::numbers::pi,
            "tail_workspace_half_angle must be in (0, pi)");
    require(gravity >= 0.0, "gravity must be >= 0");
    require(leg_rest_length > 0.0, "leg_rest_length must be > 0");
    require(body_half_extents.minCoeff() > 0.0, "body_half_extents must be > 0");
    require(body_mass == body_mass && tail_mount_offset.allFinite(), "non-finite values");
    for (const auto& f : foot_offsets) require(f.allFinite(), "foot offsets must be finite");
  }
};

}  // namespace falltail

#endif  // FALLTAIL_PARAMS_HPP_
