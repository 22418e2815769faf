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

#ifndef FALLTAIL_CONTACT_HPP_
#define FALLTAIL_CONTACT_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>

#include "falltail/spatial.hpp"

namespace falltail {

/// Penalty ground at z = 0 with viscous friction capped by Coulomb's law.
struct ContactModel {
  double stiffness = 2e5;    // N/m
  double damping = 1000.0;   // N s/m
  double friction = 0.8;
  double penetration_tolerance = 1e-4;  // m, about half the static sink of a standing foot

  void validate() const {
    if (!(stiffness > 0.0)) throw std::invalid_argument("contact stiffness must be > 0");
    if (!(damping > 0.0)) throw std::invalid_argument("contact damping must be > 0");
    if (!(friction > 0.0)) throw std::invalid_argument("friction coefficient must be > 0");
    if (!(penetration_tolerance > 0.0)) throw std::invalid_argument("penetration tolerance must be > 0");
  }
};

/// Tangential force -c v_t clamped to friction * normal.
inline Vec3 friction_force(const Vec3& velocity, double normal, const ContactModel& contact) {
  Vec3 ft{-contact.damping * velocity.x(), -contact.damping * velocity.y(), 0.0};
  const double cap = contact.friction * normal;
  const double mag = ft.norm();
  if (mag > cap) ft *= (mag > 0.0 ? cap / mag : 0.0);
  return ft;
}

/// Ground reaction on a point at world position/velocity.
inline Vec3 contact_force(const Vec3& position, const Vec3& velocity, const ContactModel& contact) {
  const double depth = -position.z();
  if (depth <= 0.0) return Vec3::Zero();
  const double normal = std::max(0.0, contact.stiffness * depth - contact.damping * velocity.z());
  Vec3 f = friction_force(velocity, normal, contact);
  f.z() = normal;
  return f;
}

struct ContactSample {
  std::array<double, 4> foot_penetration{};
  double vertical_accel = 0.0;  // body, m/s^2
};

enum class ContactDetector { kGeometric, kAcceleration };

/**
 * Per-foot contact flags from the most recent samples.
 *
 * kGeometric flags feet whose penetration exceeds the tolerance in the last
 * sample. kAcceleration flags every foot when the vertical acceleration
 * jumps by more than `accel_jump` between the last two samples.
 */
inline std::array<bool, 4> detect_contact(std::span<const ContactSample> window, double tolerance,
                                          double accel_jump, ContactDetector mode = ContactDetector::kGeometric) {
  std::array<bool, 4> flags{};
  if (window.empty()) return flags;
  const ContactSample& last = window.back();
  if (mode == ContactDetector::kGeometric) {
    for (std::size_t i = 0; i < 4; ++i) flags[i] = last.foot_penetration[i] > tolerance;
    return flags;
  }
  if (window.size() < 2) return flags;
  const double jump = std::abs(last.vertical_accel - window[window.size() - 2].vertical_accel);
  flags.fill(jump > accel_jump);
  return flags;
}

}  // namespace falltail

#endif  // FALLTAIL_CONTACT_HPP_
