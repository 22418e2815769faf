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

#ifndef FALLTAIL_SPATIAL_HPP_
#define FALLTAIL_SPATIAL_HPP_

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace falltail {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using RotationMatrix = Eigen::Matrix3d;

class GimbalLockError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

inline Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

/**
 * Unit quaternion for body orientation.
 *
 * Coefficients are exchanged in [x, y, z, w] order everywhere in the public
 * API (xyzw(), from_xyzw()). The norm is restored to one after every
 * operation that produces a new quaternion.
 */
class UnitQuaternion {
 public:
  static constexpr double kNormTolerance = 1e-6;

  UnitQuaternion() : q_(Eigen::Quaterniond::Identity()) {}

  static UnitQuaternion identity() { return {}; }

  /// Throws std::invalid_argument when |norm - 1| exceeds kNormTolerance.
  static UnitQuaternion from_xyzw(double x, double y, double z, double w) {
    const double n = std::sqrt(x * x + y * y + z * z + w * w);
    if (!std::isfinite(n) || std::abs(n - 1.0) > kNormTolerance) {
      throw std::invalid_argument("quaternion is not unit-norm");
    }
    return UnitQuaternion(Eigen::Quaterniond(w, x, y, z));
  }
  static UnitQuaternion from_xyzw(const Eigen::Vector4d& c) {
    return from_xyzw(c[0], c[1], c[2], c[3]);
  }

  /// Normalizes any non-zero quaternion.
  static UnitQuaternion normalized(const Eigen::Quaterniond& q) {
    if (!(q.norm() > 0.0)) {
      throw std::invalid_argument("cannot normalize a zero quaternion");
    }
    return UnitQuaternion(q);
  }

  /// Exponential map of a rotation vector (axis * angle).
  static UnitQuaternion exp(const Vec3& rotation_vector) {
    const double angle = rotation_vector.norm();
    const double half = 0.5 * angle;
    // sin(half)/angle with a series below 1e-6 rad
    const double k = angle < 1e-6 ? 0.5 - angle * angle / 48.0 : std::sin(half) / angle;
    return UnitQuaternion(Eigen::Quaterniond(std::cos(half), k * rotation_vector.x(),
                                             k * rotation_vector.y(), k * rotation_vector.z()));
  }

  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle) {
    return exp(axis.normalized() * angle);
  }

  /// Rotation vector with angle in [0, pi].
  Vec3 log() const {
    Eigen::Quaterniond q = q_;
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const Vec3 v = q.vec();
    const double s = v.norm();
    if (s < 1e-12) return 2.0 * v;
    return 2.0 * std::atan2(s, q.w()) / s * v;
  }

  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }
  double w() const { return q_.w(); }
  Eigen::Vector4d xyzw() const { return q_.coeffs(); }
  const Eigen::Quaterniond& eigen() const { return q_; }

  RotationMatrix matrix() const { return q_.toRotationMatrix(); }
  Vec3 rotate(const Vec3& v) const { return q_ * v; }

  UnitQuaternion inverse() const { return UnitQuaternion(q_.conjugate()); }
  UnitQuaternion operator*(const UnitQuaternion& rhs) const { return UnitQuaternion(q_ * rhs.q_); }

  /// min(|a - b|, |a + b|), which treats q and -q as the same rotation.
  static double distance(const UnitQuaternion& a, const UnitQuaternion& b) {
    return std::min((a.xyzw() - b.xyzw()).norm(), (a.xyzw() + b.xyzw()).norm());
  }

 private:
  explicit UnitQuaternion(const Eigen::Quaterniond& q) : q_(q.normalized()) {}

  Eigen::Quaterniond q_;
};

/// Intrinsic Z-Y-X angles in radians: R = Rz(yaw) * Ry(pitch) * Rx(roll).
struct EulerYPR {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
};

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

inline EulerYPR euler_deg(double yaw, double pitch, double roll) {
  return {deg2rad(yaw), deg2rad(pitch), deg2rad(roll)};
}

inline RotationMatrix rotation_from_quat(const UnitQuaternion& q) { return q.matrix(); }

/// Raw [x, y, z, w] input; throws std::invalid_argument when not unit-norm.
inline RotationMatrix rotation_from_quat(const Eigen::Vector4d& xyzw) {
  return UnitQuaternion::from_xyzw(xyzw).matrix();
}

/// Advances q by the body-side exponential map of omega_body * dt.
inline UnitQuaternion quat_integrate(const UnitQuaternion& q, const Vec3& omega_body, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("quat_integrate requires dt > 0");
  return q * UnitQuaternion::exp(omega_body * dt);
}

/// 0.5 * tr(I - R(q_d)^T R(q)), in [0, 2].
inline double attitude_error(const UnitQuaternion& q_desired, const UnitQuaternion& q) {
  const RotationMatrix re = q_desired.matrix().transpose() * q.matrix();
  return 0.5 * (3.0 - re.trace());
}

inline UnitQuaternion quat_from_euler(const EulerYPR& e) {
  return UnitQuaternion::from_axis_angle(Vec3::UnitZ(), e.yaw) *
         UnitQuaternion::from_axis_angle(Vec3::UnitY(), e.pitch) *
         UnitQuaternion::from_axis_angle(Vec3::UnitX(), e.roll);
}

/// Throws GimbalLockError when |pitch| >= pi/2 - 1e-6.
inline EulerYPR euler_from_quat(const UnitQuaternion& q) {
  const RotationMatrix r = q.matrix();
  const double cp = std::hypot(r(0, 0), r(1, 0));
  const double pitch = std::atan2(-r(2, 0), cp);
  if (std::abs(pitch) >= std::numbers::pi / 2.0 - 1e-6) {
    throw GimbalLockError("pitch too close to +/-90 deg for a unique yaw-pitch-roll");
  }
  return {std::atan2(r(1, 0), r(0, 0)), pitch, std::atan2(r(2, 1), r(2, 2))};
}

/// Inverse of the right Jacobian of SO(3): maps body angular velocity to the
/// rate of a body-side rotation vector phi, i.e. d/dt phi = Jr^-1(phi) omega.
inline Mat3 so3_right_jacobian_inverse(const Vec3& phi) {
  const double t = phi.norm();
  const Mat3 s = skew(phi);
  double c;
  if (t < 1e-4) {
    c = 1.0 / 12.0 + t * t / 720.0;
  } else {
    c = (1.0 - 0.5 * t * std::sin(t) / (1.0 - std::cos(t))) / (t * t);
  }
  return Mat3::Identity() + 0.5 * s + c * s * s;
}

/// Body-side rotation increment that takes `from` to `to`: to = from * exp(d).
inline Vec3 rotation_difference(const UnitQuaternion& from, const UnitQuaternion& to) {
  return (from.inverse() * to).log();
}

}  // namespace falltail

#endif  // FALLTAIL_SPATIAL_HPP_
