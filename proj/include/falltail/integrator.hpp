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

#ifndef FALLTAIL_INTEGRATOR_HPP_
#define FALLTAIL_INTEGRATOR_HPP_

#include <stdexcept>

#include "falltail/model.hpp"

namespace falltail {

namespace detail {

/// Local chart around a base state: position/joint offsets, a body-side
/// rotation vector, and the full generalized velocity.
template <int TailDofs, int NumExtra>
struct ChartPoint {
  using TailVec = Eigen::Matrix<double, TailDofs, 1>;
  using Velocity = Eigen::Matrix<double, 6 + TailDofs, 1>;
  using Extra = Eigen::Matrix<double, NumExtra, 1>;
  Vec3 dp = Vec3::Zero();
  Vec3 phi = Vec3::Zero();
  TailVec dq = TailVec::Zero();
  Velocity u = Velocity::Zero();
  Extra extra = Extra::Zero();

  ChartPoint axpy(double a, const ChartPoint& d) const {
    ChartPoint r = *this;
    r.dp += a * d.dp;
    r.phi += a * d.phi;
    r.dq += a * d.dq;
    r.u += a * d.u;
    r.extra += a * d.extra;
    return r;
  }
};

template <int TailDofs, int NumExtra>
SystemState<TailDofs> from_chart(const SystemState<TailDofs>& base,
                                 const ChartPoint<TailDofs, NumExtra>& c) {
  SystemState<TailDofs> x;
  x.p = base.p + c.dp;
  x.orientation = base.orientation * UnitQuaternion::exp(c.phi);
  x.q_tail = base.q_tail + c.dq;
  x.set_velocity(c.u);
  return x;
}

}  // namespace detail

/**
 * One classical RK4 step (Munthe-Kaas form) of the floating-base dynamics.
 *
 * The orientation is advanced through a body-side rotation vector phi with
 * phi_dot = Jr^-1(phi) omega, so every stage lies on the unit sphere and the
 * step keeps fourth-order accuracy on SO(3). `extra` carries additional
 * first-order states (e.g. leg compressions) integrated alongside.
 *
 * rate(x, extra, accel, extra_rate) fills the generalized acceleration and
 * the rate of `extra` at a stage.
 */
template <int TailDofs, int NumExtra, class RateFn>
void rk4_step(SystemState<TailDofs>& x, Eigen::Matrix<double, NumExtra, 1>& extra, double dt,
              RateFn&& rate) {
  using Chart = detail::ChartPoint<TailDofs, NumExtra>;
  using Velocity = typename Chart::Velocity;
  using Extra = typename Chart::Extra;

  const SystemState<TailDofs> base = x;
  Chart c0;
  c0.u = x.velocity();
  c0.extra = extra;

  auto derivative = [&](const Chart& c) {
    const SystemState<TailDofs> s = detail::from_chart(base, c);
    Velocity accel;
    Extra extra_rate;
    rate(static_cast<const SystemState<TailDofs>&>(s), static_cast<const Extra&>(c.extra), accel,
         extra_rate);
    Chart d;
    d.dp = c.u.template head<3>();
    d.phi = so3_right_jacobian_inverse(c.phi) * c.u.template segment<3>(3);
    d.dq = c.u.template tail<TailDofs>();
    d.u = accel;
    d.extra = extra_rate;
    return d;
  };

  const Chart k1 = derivative(c0);
  const Chart k2 = derivative(c0.axpy(0.5 * dt, k1));
  const Chart k3 = derivative(c0.axpy(0.5 * dt, k2));
  const Chart k4 = derivative(c0.axpy(dt, k3));
  Chart c1 = c0.axpy(dt / 6.0, k1).axpy(dt / 3.0, k2).axpy(dt / 3.0, k3).axpy(dt / 6.0, k4);
  x = detail::from_chart(base, c1);
  extra = c1.extra;
}

template <int TailDofs, class AccelFn>
void rk4_step(SystemState<TailDofs>& x, double dt, AccelFn&& accel) {
  Eigen::Matrix<double, 0, 1> none;
  rk4_step<TailDofs, 0>(x, none, dt,
                        [&](const SystemState<TailDofs>& s, const Eigen::Matrix<double, 0, 1>&,
                            typename SystemState<TailDofs>::Velocity& a,
                            Eigen::Matrix<double, 0, 1>&) { a = accel(s); });
}

/**
 * One step of the contact-free dynamics under constant tail forces.
 *
 * Attitude, tail and rates take an RK4 step. The system CoM is ballistic in
 * flight, so it is advanced in closed form and the body translation is
 * recovered from it (the CoM is the body position plus a configuration-only
 * offset, with unit coefficient in p and p_dot).
 */
template <int TailDofs>
SystemState<TailDofs> discretize(const TailedRobotModel<TailDofs>& model,
                                 const SystemState<TailDofs>& x,
                                 const typename TailedRobotModel<TailDofs>::ActuatorForce& tau,
                                 double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("discretize requires dt > 0");
  SystemState<TailDofs> next = x;
  rk4_step(next, dt, [&](const SystemState<TailDofs>& s) { return model.forward_dynamics(s, tau); });
  const Vec3 g{0.0, 0.0, -model.params().gravity};
  const Vec3 c0 = model.system_com(x);
  const Vec3 v0 = model.system_com_velocity(x);
  next.p += c0 + dt * v0 + 0.5 * dt * dt * g - model.system_com(next);
  next.p_dot += v0 + dt * g - model.system_com_velocity(next);
  return next;
}

}  // namespace falltail

#endif  // FALLTAIL_INTEGRATOR_HPP_
