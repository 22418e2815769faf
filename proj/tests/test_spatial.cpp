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

#include <gtest/gtest.h>

#include <array>
#include <numbers>

#include "falltail/spatial.hpp"
#include "test_utils.hpp"

namespace falltail {
namespace {

using testing::random_quat;
using testing::random_vec;
constexpr double kPi = std::numbers::pi;

TEST(RotationFromQuat, IdentityAndQuarterYaw) {
  EXPECT_TRUE(rotation_from_quat(UnitQuaternion::identity()).isApprox(Mat3::Identity(), 1e-15));
  const RotationMatrix r =
      rotation_from_quat(Eigen::Vector4d(0.0, 0.0, std::sin(kPi / 4), std::cos(kPi / 4)));
  EXPECT_NEAR(r(0, 1), -1.0, 1e-15);
  EXPECT_NEAR(r(1, 0), 1.0, 1e-15);
}

TEST(RotationFromQuat, RejectsNonUnitInput) {
  EXPECT_THROW(rotation_from_quat(Eigen::Vector4d(0.0, 0.0, 0.0, 1.0 + 2e-6)),
               std::invalid_argument);
  EXPECT_NO_THROW(rotation_from_quat(Eigen::Vector4d(0.0, 0.0, 0.0, 1.0 + 5e-7)));
}

TEST(RotationFromQuat, RandomIsOrthonormal) {
  std::mt19937 rng(1);
  for (int i = 0; i < 200; ++i) {
    const UnitQuaternion q = random_quat(rng);
    const RotationMatrix r = rotation_from_quat(q);
    EXPECT_LT((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    const RotationMatrix r_neg = rotation_from_quat(Eigen::Vector4d(-q.xyzw()));
    EXPECT_LT((r - r_neg).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(QuatIntegrate, ZeroRateAndHalfTurn) {
  const UnitQuaternion q = quat_integrate(UnitQuaternion::identity(), Vec3::Zero(), 0.01);
  EXPECT_NEAR(UnitQuaternion::distance(q, UnitQuaternion::identity()), 0.0, 1e-15);
  const UnitQuaternion yaw = quat_integrate(UnitQuaternion::identity(), Vec3(0, 0, kPi), 1.0);
  EXPECT_NEAR(UnitQuaternion::distance(yaw, UnitQuaternion::from_xyzw(0, 0, 1, 0)), 0.0, 1e-12);
  EXPECT_THROW(quat_integrate(q, Vec3::Zero(), 0.0), std::invalid_argument);
}

TEST(QuatIntegrate, MatchesFineSubsteps) {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const UnitQuaternion q0 = random_quat(rng);
    const Vec3 w = random_vec(rng, 5.0);
    UnitQuaternion fine = q0;
    for (int i = 0; i < 1000; ++i) fine = quat_integrate(fine, w, 1e-4);
    EXPECT_LT(UnitQuaternion::distance(quat_integrate(q0, w, 0.1), fine), 1e-6);
  }
}

TEST(QuatIntegrate, NormPreservedPerStep) {
  std::mt19937 rng(3);
  UnitQuaternion q = random_quat(rng);
  for (int i = 0; i < 2000; ++i) {
    Vec3 w = random_vec(rng, 50.0);
    if (w.norm() > 50.0) w *= 50.0 / w.norm();
    // product before renormalization
    const Eigen::Quaterniond raw = q.eigen() * UnitQuaternion::exp(w * 2e-3).eigen();
    EXPECT_NEAR(raw.norm(), 1.0, 1e-12);
    q = quat_integrate(q, w, 2e-3);
  }
}

TEST(AttitudeError, ClosedFormValues) {
  std::mt19937 rng(4);
  const UnitQuaternion q = random_quat(rng);
  EXPECT_NEAR(attitude_error(q, q), 0.0, 1e-15);
  for (const Vec3& axis : std::array<Vec3, 4>{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ(), Vec3(1, 2, 3)}) {
    EXPECT_NEAR(attitude_error(UnitQuaternion::identity(),
                               UnitQuaternion::from_axis_angle(axis, kPi)),
                2.0, 1e-12);
  }
  EXPECT_NEAR(attitude_error(UnitQuaternion::identity(),
                             UnitQuaternion::from_axis_angle(Vec3::UnitZ(), kPi / 2)),
              1.0, 1e-12);
}

TEST(AttitudeError, SymmetricAndRightInvariant) {
  std::mt19937 rng(5);
  for (int i = 0; i < 500; ++i) {
    const UnitQuaternion a = random_quat(rng), b = random_quat(rng), r = random_quat(rng);
    const double e = attitude_error(a, b);
    EXPECT_GE(e, -1e-15);
    EXPECT_LE(e, 2.0 + 1e-15);
    EXPECT_NEAR(e, attitude_error(b, a), 1e-12);
    EXPECT_NEAR(e, attitude_error(r * a, r * b), 1e-12);
  }
}

TEST(Euler, IdentityAndFigureCase) {
  const EulerYPR zero = euler_from_quat(UnitQuaternion::identity());
  EXPECT_EQ(zero.yaw, 0.0);
  EXPECT_EQ(zero.pitch, 0.0);
  EXPECT_EQ(zero.roll, 0.0);
  EXPECT_NEAR(UnitQuaternion::distance(quat_from_euler({}), UnitQuaternion::identity()), 0.0,
              1e-15);

  const EulerYPR e = euler_deg(15.0, 25.0, 35.0);
  const UnitQuaternion q = quat_from_euler(e);
  EXPECT_NEAR(q.xyzw().norm(), 1.0, 1e-12);
  const EulerYPR back = euler_from_quat(q);
  EXPECT_NEAR(back.yaw, e.yaw, 1e-12);
  EXPECT_NEAR(back.pitch, e.pitch, 1e-12);
  EXPECT_NEAR(back.roll, e.roll, 1e-12);
  EXPECT_LT(UnitQuaternion::distance(quat_from_euler(back), q), 1e-9);
}

TEST(Euler, ConventionIsIntrinsicZYX) {
  const EulerYPR e = euler_deg(10.0, 20.0, 30.0);
  const Mat3 expected = (Eigen::AngleAxisd(e.yaw, Vec3::UnitZ()) *
                         Eigen::AngleAxisd(e.pitch, Vec3::UnitY()) *
                         Eigen::AngleAxisd(e.roll, Vec3::UnitX()))
                            .toRotationMatrix();
  EXPECT_LT((quat_from_euler(e).matrix() - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Euler, RandomRoundTrip) {
  std::mt19937 rng(6);
  int checked = 0;
  while (checked < 1000) {
    const UnitQuaternion q = random_quat(rng);
    EulerYPR e;
    try {
      e = euler_from_quat(q);
    } catch (const GimbalLockError&) {
      continue;
    }
    if (std::abs(e.pitch) > kPi / 2 - 1e-3) continue;
    EXPECT_LT(UnitQuaternion::distance(quat_from_euler(e), q), 1e-9);
    ++checked;
  }
}

TEST(Euler, GimbalLockIsReported) {
  const UnitQuaternion q = quat_from_euler({0.3, kPi / 2, 0.1});
  EXPECT_THROW(euler_from_quat(q), GimbalLockError);
  const UnitQuaternion near = quat_from_euler({0.3, kPi / 2 - 1e-8, 0.1});
  EXPECT_THROW(euler_from_quat(near), GimbalLockError);
}

TEST(So3, ExpLogRoundTripAndDifference) {
  std::mt19937 rng(7);
  for (int i = 0; i < 100; ++i) {
    Vec3 v = random_vec(rng, 1.5);
    EXPECT_LT((UnitQuaternion::exp(v).log() - v).norm(), 1e-12);
    const UnitQuaternion a = random_quat(rng);
    const UnitQuaternion b = a * UnitQuaternion::exp(v);
    EXPECT_LT((rotation_difference(a, b) - v).norm(), 1e-11);
  }
}

TEST(So3, RightJacobianInverseMatchesFiniteDifference) {
  // d/dt exp(phi + t*dphi) at t=0 equals exp(phi) [Jr(phi) dphi]_x; check Jr^-1
  std::mt19937 rng(8);
  for (int i = 0; i < 20; ++i) {
    const Vec3 phi = random_vec(rng, 1.0);
    const Vec3 omega = random_vec(rng, 1.0);
    const Vec3 dphi = so3_right_jacobian_inverse(phi) * omega;
    const double h = 1e-6;
    const UnitQuaternion r0 = UnitQuaternion::exp(phi);
    const UnitQuaternion rp = UnitQuaternion::exp(phi + h * dphi);
    const UnitQuaternion rm = UnitQuaternion::exp(phi - h * dphi);
    const Vec3 w_fd = (rotation_difference(r0, rp) - rotation_difference(r0, rm)) / (2 * h);
    EXPECT_LT((w_fd - omega).norm(), 1e-8);
  }
}

}  // namespace
}  // namespace falltail
