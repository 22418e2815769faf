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

#include <cmath>
#include <vector>

#include "falltail/trajopt.hpp"
#include "oracles.hpp"
#include "test_utils.hpp"

namespace falltail {
namespace {

using testing::random_state;
using testing::riccati_controls;
using testing::richardson_jacobians;

// Rotation angle between two attitudes from an independent axis-angle path.
double angle_between(const UnitQuaternion& a, const UnitQuaternion& b) {
  const Eigen::AngleAxisd aa(rotation_from_quat(a).transpose() * rotation_from_quat(b));
  return std::abs(aa.angle());
}

OCProblem reference_problem() {
  OCProblem p = rest_terminal_weights();
  p.x0.p = Vec3(0.0, 0.0, 1.85);
  p.x0.orientation = quat_from_euler(euler_deg(15.0, 25.0, 35.0));
  return p;
}

TEST(Cost, StageCostIsSumOfComponents) {
  std::mt19937 rng(3);
  OCProblem p;
  p.target = testing::random_quat(rng);
  for (int i = 0; i < 20; ++i) {
    const PlanningState x = random_state<2>(rng, p.model.params());
    const TailTorque tau = TailTorque::Random() * 5.0;
    const double e = 1.0 - std::cos(angle_between(p.target, x.orientation));
    double quad = 0.0;
    const auto u = x.velocity();
    for (int j = 0; j < 8; ++j) quad += 0.5 * p.velocity_weights(j) * u(j) * u(j);
    quad += 0.5 * p.torque_weights(0) * tau(0) * tau(0) + 0.5 * p.torque_weights(1) * tau(1) * tau(1);
    EXPECT_NEAR(stage_cost(x, tau, p), e + quad, 1e-12);
    EXPECT_NEAR(terminal_cost(x, p), p.terminal_weight * e, 1e-12);
  }
}

TEST(Cost, ZeroAtTargetAndAtRest) {
  OCProblem p;
  PlanningState x;
  x.q_tail << 0.3, -0.2;
  EXPECT_EQ(stage_cost(x, TailTorque::Zero(), p), 0.0);
  EXPECT_EQ(terminal_cost(x, p), 0.0);
}

TEST(Cost, HalfTurnTerminalCost) {
  OCProblem p;
  PlanningState x;
  x.orientation = UnitQuaternion::exp(Vec3(M_PI, 0.0, 0.0));
  EXPECT_NEAR(terminal_cost(x, p), 1000.0, 1e-9);
}

TEST(Cost, TerminalRestPenalty) {
  OCProblem p = rest_terminal_weights();
  PlanningState x;
  x.p_dot = Vec3(1.0, 2.0, 3.0);  // translation is never penalized
  x.omega = Vec3(1.0, 0.0, 0.0);
  x.q_tail_dot << 0.0, 2.0;
  EXPECT_NEAR(terminal_cost(x, p), 0.5 * 5.0 * (1.0 + 4.0), 1e-12);
}

TEST(Cost, AttitudeExpansionMatchesFiniteDifferences) {
  std::mt19937 rng(4);
  for (int i = 0; i < 20; ++i) {
    const UnitQuaternion target = testing::random_quat(rng);
    const UnitQuaternion q = target * UnitQuaternion::exp(testing::random_vec(rng, 1.0));
    Vec3 g;
    Mat3 h;
    attitude_error_expansion(target, q, g, h);
    const double step = 1e-5;
    for (int j = 0; j < 3; ++j) {
      const Vec3 d = Vec3::Unit(j) * step;
      const double fd = (attitude_error(target, q * UnitQuaternion::exp(d)) -
                         attitude_error(target, q * UnitQuaternion::exp(-d))) / (2.0 * step);
      EXPECT_NEAR(g(j), fd, 1e-8);
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(h);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
    EXPECT_LT((h - h.transpose()).norm(), 1e-14);
  }
}

TEST(Cost, AttitudeHessianIsIdentityAtTarget) {
  // e = 1 - cos|phi| ~ |phi|^2 / 2 near the target
  Vec3 g;
  Mat3 h;
  attitude_error_expansion(UnitQuaternion(), UnitQuaternion(), g, h);
  EXPECT_LT(g.norm(), 1e-15);
  EXPECT_LT((h - Mat3::Identity()).norm(), 1e-15);
}

TEST(Jacobians, MatchRichardsonExtrapolation) {
  const PlanningModel model(RobotParams{});
  std::mt19937 rng(5);
  for (int i = 0; i < 10; ++i) {
    const PlanningState x = random_state<2>(rng, model.params());
    const TailTorque tau = TailTorque::Random() * 6.0;
    Eigen::Matrix<double, 16, 16> a, ra;
    Eigen::Matrix<double, 16, 2> b, rb;
    dynamics_derivatives(model, x, tau, 2e-3, a, b);
    richardson_jacobians(model, x, tau, 2e-3, 1e-4, ra, rb);
    EXPECT_LT((a - ra).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, ra.cwiseAbs().maxCoeff())) << i;
    EXPECT_LT((b - rb).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, rb.cwiseAbs().maxCoeff())) << i;
  }
}

TEST(Jacobians, PositionRowsOfInputMatrixScaleWithDtSquared) {
  const PlanningModel model(RobotParams{});
  std::mt19937 rng(6);
  const PlanningState x = random_state<2>(rng, model.params(), 0.8, 1.0);
  Eigen::Matrix<double, 16, 16> a;
  Eigen::Matrix<double, 16, 2> b1, b2;
  dynamics_derivatives(model, x, TailTorque(1.0, -1.0), 2e-3, a, b1);
  dynamics_derivatives(model, x, TailTorque(1.0, -1.0), 1e-3, a, b2);
  const double r = b1.topRows<8>().cwiseAbs().maxCoeff() / b2.topRows<8>().cwiseAbs().maxCoeff();
  EXPECT_NEAR(r, 4.0, 0.2);
  EXPECT_LT(b1.topRows<8>().cwiseAbs().maxCoeff(), 0.1 * b1.bottomRows<8>().cwiseAbs().maxCoeff());
}

TEST(Jacobians, FreeFallStructure) {
  const PlanningModel model(RobotParams{});
  PlanningState x;
  x.p.z() = 1.85;
  const double dt = 2e-3;
  Eigen::Matrix<double, 16, 16> a;
  Eigen::Matrix<double, 16, 2> b;
  dynamics_derivatives(model, x, TailTorque::Zero(), dt, a, b);
  EXPECT_LT((a.block<3, 3>(0, 0) - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT((a.block<3, 3>(0, 8) - dt * Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT((a.block<3, 3>(8, 8) - Mat3::Identity()).norm(), 1e-12);
  // At rest the attitude and tail angles are only coupled to their own rates.
  EXPECT_LT((a.block<8, 8>(0, 0) - Eigen::Matrix<double, 8, 8>::Identity()).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Solver, SettingsValidation) {
  auto bad = [](auto mutate) {
    SolverSettings s;
    mutate(s);
    return s;
  };
  EXPECT_NO_THROW(SolverSettings{}.validate());
  EXPECT_THROW(bad([](SolverSettings& s) { s.max_iterations = 0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](SolverSettings& s) { s.regularization_growth = 1.0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](SolverSettings& s) { s.line_search_factor = 1.0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](SolverSettings& s) { s.barrier_weight = 0.0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](SolverSettings& s) { s.penalty_growth = 0.5; }).validate(), std::invalid_argument);
}

TEST(Solver, ProblemValidation) {
  OCProblem p;
  EXPECT_NO_THROW(p.validate());
  p.velocity_weights(0) = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = OCProblem{};
  p.terminal_velocity_weights(2) = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = OCProblem{};
  p.torque_weights(1) = -1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = OCProblem{};
  p.horizon = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  EXPECT_THROW(solve(p, SolverSettings{}), std::invalid_argument);
}

TEST(Solver, AlreadyAtTargetIsAFixedPoint) {
  OCProblem p;
  p.x0.p.z() = 1.85;
  const PlanningSolution sol = solve(p, SolverSettings{});
  EXPECT_TRUE(sol.converged);
  EXPECT_LE(sol.iterations, 2);
  EXPECT_LT(sol.cost, 1e-8);
}

TEST(Solver, HalfTurnIsPerturbedWithAWarning) {
  OCProblem p;
  p.horizon = 100;
  p.x0.orientation = UnitQuaternion::exp(Vec3(0.0, 0.0, M_PI));
  const PlanningSolution sol = solve(p, SolverSettings{});
  ASSERT_FALSE(sol.warnings.empty());
  EXPECT_NE(sol.warnings.front().find("half-turn"), std::string::npos);
  // The plan leaves the critical point instead of stopping on it.
  EXPECT_LT(attitude_error(p.target, sol.states.back().orientation), 1.99);
}

TEST(Solver, MatchesRiccatiOnLinearQuadraticProblem) {
  const Eigen::Matrix4d q = Eigen::Vector4d(1.0, 2.0, 0.1, 0.2).asDiagonal();
  const Eigen::Matrix2d r = Eigen::Vector2d(0.01, 0.05).asDiagonal();
  const Eigen::Matrix4d qf = 100.0 * Eigen::Matrix4d::Identity();
  const DoubleIntegratorProblem p(Eigen::Vector4d(1.0, -2.0, 0.5, 0.3), 50, 0.05, q, r, qf);
  SolverSettings s;
  s.stationarity_tolerance = 1e-8;  // the regularization floor limits what is reachable
  ConstrainedIlqr<DoubleIntegratorProblem> solver(p, s);
  const auto sol = solver.solve(std::vector<Eigen::Vector2d>(50, Eigen::Vector2d::Zero()));
  EXPECT_TRUE(sol.converged);
  const auto expected = riccati_controls(p, q, r, qf);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) worst = std::max(worst, (sol.controls[k] - expected[k]).cwiseAbs().maxCoeff());
  EXPECT_LT(worst, 1e-6);
}

class ReferencePlan : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    problem_ = new OCProblem(reference_problem());
    solution_ = new PlanningSolution(solve(*problem_, SolverSettings{}));
  }
  static void TearDownTestSuite() {
    delete solution_;
    delete problem_;
  }
  static OCProblem* problem_;
  static PlanningSolution* solution_;
};

OCProblem* ReferencePlan::problem_ = nullptr;
PlanningSolution* ReferencePlan::solution_ = nullptr;

TEST_F(ReferencePlan, ConvergesToTheTarget) {
  const PlanningSolution& sol = *solution_;
  EXPECT_TRUE(sol.converged);
  EXPECT_LE(sol.iterations, 400);
  EXPECT_LE(sol.stationarity, 1e-3);
  EXPECT_LT(attitude_error(problem_->target, sol.states.back().orientation), 0.012);
  EXPECT_LE(sol.max_control_violation, 1e-4);
  EXPECT_LE(sol.max_state_violation, 1e-4);
}

TEST_F(ReferencePlan, CostDecreasesWithinEachSegment) {
  const PlanningSolution& sol = *solution_;
  ASSERT_EQ(sol.cost_history.size(), sol.cost_segment.size());
  for (std::size_t i = 1; i < sol.cost_history.size(); ++i) {
    if (sol.cost_segment[i] != sol.cost_segment[i - 1]) continue;
    EXPECT_LT(sol.cost_history[i], sol.cost_history[i - 1]) << i;
  }
}

TEST_F(ReferencePlan, GainsAreBounded) {
  for (const PlanningGain& k : solution_->gains) {
    EXPECT_LT(k.cwiseAbs().rowwise().sum().maxCoeff(), 1e4);
  }
}

TEST_F(ReferencePlan, RolloutIsReproducible) {
  PlanningState x = problem_->x0;
  for (int k = 0; k < problem_->horizon; ++k) {
    x = discretize(problem_->model, x, solution_->controls[k], problem_->dt);
    ASSERT_EQ(x.p, solution_->states[k + 1].p) << k;
    ASSERT_EQ(x.orientation.xyzw(), solution_->states[k + 1].orientation.xyzw()) << k;
    ASSERT_EQ(x.velocity(), solution_->states[k + 1].velocity()) << k;
  }
  EXPECT_NEAR(trajectory_cost(*problem_, solution_->controls), solution_->cost, 1e-9);
}

TEST_F(ReferencePlan, InitialStateGradientMatchesDirectionalDerivative) {
  const PlanningTangent g = initial_state_gradient(*problem_, SolverSettings{}, solution_->controls);
  std::mt19937 rng(9);
  for (int i = 0; i < 3; ++i) {
    const Vec3 axis = testing::random_vec(rng, 1.0).normalized();
    PlanningTangent d = PlanningTangent::Zero();
    d.segment<3>(3) = 1e-5 * axis;
    OCProblem plus = *problem_, minus = *problem_;
    plus.x0 = state_retract(problem_->x0, d);
    minus.x0 = state_retract(problem_->x0, -d);
    const double fd = (trajectory_cost(plus, solution_->controls) - trajectory_cost(minus, solution_->controls)) /
                      2e-5;
    const double predicted = g.segment<3>(3).dot(axis);
    EXPECT_NEAR(predicted, fd, 1e-3 * std::max(1.0, std::abs(fd))) << i;
  }
}

}  // namespace
}  // namespace falltail
