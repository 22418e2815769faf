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

#include "falltail/integrator.hpp"
#include "test_utils.hpp"

namespace falltail {
namespace {

using testing::random_state;

double state_distance(const PlanningState& a, const PlanningState& b) {
  Eigen::Matrix<double, 16, 1> d;
  d << b.p - a.p, rotation_difference(a.orientation, b.orientation), b.q_tail - a.q_tail,
      b.velocity() - a.velocity();
  return d.cwiseAbs().maxCoeff();
}

TEST(Discretize, SingleStepFreeFall) {
  const PlanningModel model(RobotParams{});
  PlanningState x;
  x.p.z() = 1.85;
  const PlanningState y = discretize(model, x, Eigen::Vector2d::Zero(), 2e-3);
  EXPECT_NEAR(y.p.z() - x.p.z(), -0.5 * 9.81 * 4e-6, 1e-12);
  EXPECT_EQ(y.orientation.xyzw(), x.orientation.xyzw());
  EXPECT_THROW(discretize(model, x, Eigen::Vector2d::Zero(), 0.0), std::invalid_argument);
}

TEST(Discretize, TwoHundredStepsOfFreeFall) {
  const PlanningModel model(RobotParams{});
  PlanningState x;
  x.p.z() = 1.85;
  for (int k = 0; k < 200; ++k) x = discretize(model, x, Eigen::Vector2d::Zero(), 2e-3);
  EXPECT_NEAR(x.p.z(), 1.85 - 0.5 * 9.81 * 0.4 * 0.4, 1e-9);
  EXPECT_NEAR(x.p.z(), 1.0652, 1e-9);
}

PlanningState substeps(const PlanningModel& model, PlanningState x, const Eigen::Vector2d& tau,
                       double dt, int n) {
  for (int k = 0; k < n; ++k) x = discretize(model, x, tau, dt / n);
  return x;
}

TEST(Discretize, FifthOrderLocalError) {
  const PlanningModel model(RobotParams{});
  std::mt19937 rng(21);
  for (int i = 0; i < 20; ++i) {
    const PlanningState x = random_state<2>(rng, model.params(), 1.0, 1.0);
    // moderate torques: |u_dot| stays below ~30 rad/s^2
    const Eigen::Vector2d tau = Eigen::Vector2d::Random() * 2.0;
    const double e2 = state_distance(discretize(model, x, tau, 2e-3), substeps(model, x, tau, 2e-3, 100));
    EXPECT_LT(e2, 1e-10) << i;

    // full torque range: check the local error shrinks like dt^5
    const Eigen::Vector2d big = Eigen::Vector2d::Random() * 6.0;
    const double a = state_distance(discretize(model, x, big, 2e-3), substeps(model, x, big, 2e-3, 100));
    const double b = state_distance(discretize(model, x, big, 1e-3), substeps(model, x, big, 1e-3, 100));
    EXPECT_GT(a / b, 25.0) << i;
  }
}

TEST(Discretize, ConvergesAtFourthOrder) {
  const PlanningModel model(RobotParams{});
  std::mt19937 rng(22);
  const PlanningState x = random_state<2>(rng, model.params(), 1.0, 4.0);
  const Eigen::Vector2d tau(3.0, -2.0);
  auto run = [&](int steps) {
    PlanningState y = x;
    for (int k = 0; k < steps; ++k) y = discretize(model, y, tau, 0.2 / steps);
    return y;
  };
  const PlanningState ref = run(3200);
  const double e1 = state_distance(run(50), ref);
  const double e2 = state_distance(run(100), ref);
  EXPECT_GT(e1 / e2, 12.0);
}

}  // namespace
}  // namespace falltail
