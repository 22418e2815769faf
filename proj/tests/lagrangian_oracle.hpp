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

// Independent equations of motion for the tailed body, built from a
// Lagrangian in a local rotation-vector chart around a given state. Point
// and angular velocity Jacobians come from forward-mode dual numbers; only
// dM/dq uses central differences.

#ifndef FALLTAIL_TESTS_LAGRANGIAN_ORACLE_HPP_
#define FALLTAIL_TESTS_LAGRANGIAN_ORACLE_HPP_

#include <array>
#include <cmath>

#include "falltail/model.hpp"

namespace falltail::testing {

struct Dual {
  double v = 0.0;
  double d = 0.0;
  Dual() = default;
  Dual(double value, double deriv = 0.0) : v(value), d(deriv) {}
};
inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(Dual a, Dual b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
inline Dual sin(Dual a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
inline Dual cos(Dual a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }

template <class S> using V3 = std::array<S, 3>;
template <class S> using M3 = std::array<V3<S>, 3>;

template <class S>
M3<S> mul(const M3<S>& a, const M3<S>& b) {
  M3<S> c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      S s = S(0.0);
      for (int k = 0; k < 3; ++k) s = s + a[i][k] * b[k][j];
      c[i][j] = s;
    }
  return c;
}
template <class S>
V3<S> mul(const M3<S>& a, const V3<S>& b) {
  V3<S> c{};
  for (int i = 0; i < 3; ++i) c[i] = a[i][0] * b[0] + a[i][1] * b[1] + a[i][2] * b[2];
  return c;
}
template <class S>
M3<S> from_eigen(const Mat3& m) {
  M3<S> r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i][j] = S(m(i, j));
  return r;
}
// exp of a skew matrix by truncated series; valid for the tiny chart offsets used here
template <class S>
M3<S> exp_skew(const V3<S>& w) {
  M3<S> a{};
  a[0] = {S(0.0), -w[2], w[1]};
  a[1] = {w[2], S(0.0), -w[0]};
  a[2] = {-w[1], w[0], S(0.0)};
  M3<S> result{}, term{};
  for (int i = 0; i < 3; ++i) {
    result[i][i] = S(1.0);
    term[i][i] = S(1.0);
  }
  for (int k = 1; k < 12; ++k) {
    term = mul(term, a);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) term[i][j] = term[i][j] / S(static_cast<double>(k));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) result[i][j] = result[i][j] + term[i][j];
  }
  return result;
}
template <class S>
M3<S> rot_z(S a) {
  M3<S> r{};
  r[0] = {cos(a), -sin(a), S(0.0)};
  r[1] = {sin(a), cos(a), S(0.0)};
  r[2] = {S(0.0), S(0.0), S(1.0)};
  return r;
}
template <class S>
M3<S> rot_y(S a) {
  M3<S> r{};
  r[0] = {cos(a), S(0.0), sin(a)};
  r[1] = {S(0.0), S(1.0), S(0.0)};
  r[2] = {-sin(a), S(0.0), cos(a)};
  return r;
}

template <int TailDofs>
class LagrangianOracle {
 public:
  static constexpr int kN = 6 + TailDofs;
  using VecN = Eigen::Matrix<double, kN, 1>;
  using MatN = Eigen::Matrix<double, kN, kN>;

  LagrangianOracle(const RobotParams& params, const SystemState<TailDofs>& x)
      : params_(params), x_(x) {}

  /// Generalized accelerations; with the chart centred on the state these
  /// equal [p_ddot, omega_dot, q_tail_ddot].
  VecN accelerations(const Eigen::Matrix<double, TailDofs, 1>& tau) const {
    const VecN q0 = VecN::Zero();
    const VecN qd = x_.velocity();
    const MatN m = mass(q0);
    VecN rhs = VecN::Zero();
    rhs.template tail<TailDofs>() = tau;
    rhs -= potential_gradient(q0);
    const double h = 1e-6;
    MatN mdot = MatN::Zero();
    VecN dtdq = VecN::Zero();
    for (int j = 0; j < kN; ++j) {
      VecN e = VecN::Zero();
      e[j] = h;
      const MatN dm = (mass(q0 + e) - mass(q0 - e)) / (2.0 * h);
      mdot += dm * qd[j];
      dtdq[j] = 0.5 * qd.dot(dm * qd);
    }
    rhs += dtdq - mdot * qd;
    return m.ldlt().solve(rhs);
  }

  MatN mass(const VecN& q) const {
    Eigen::Matrix<double, 3, kN> jp, jwb, jt, jwt;
    for (int i = 0; i < kN; ++i) {
      std::array<Dual, kN> dq;
      for (int k = 0; k < kN; ++k) dq[k] = Dual(q[k], k == i ? 1.0 : 0.0);
      const Frames<Dual> f = frames(dq);
      for (int r = 0; r < 3; ++r) {
        jp(r, i) = f.p[r].d;
        jt(r, i) = f.tip[r].d;
      }
      jwb.col(i) = vee_of(f.rot, true);
      jwt.col(i) = vee_of(f.tip_rot, false);
    }
    MatN m = params_.body_mass * jp.transpose() * jp +
             jwb.transpose() * params_.body_inertia.asDiagonal() * jwb +
             params_.tail_mass * jt.transpose() * jt +
             params_.tail_tip_inertia * jwt.transpose() * jwt;
    return m;
  }

 private:
  template <class S>
  struct Frames {
    V3<S> p;
    M3<S> rot;
    V3<S> tip;
    M3<S> tip_rot;
  };

  template <class S>
  Frames<S> frames(const std::array<S, kN>& q) const {
    Frames<S> f;
    f.p = {S(x_.p.x()) + q[0], S(x_.p.y()) + q[1], S(x_.p.z()) + q[2]};
    f.rot = mul(from_eigen<S>(x_.orientation.matrix()), exp_skew<S>({q[3], q[4], q[5]}));
    const S pitch = S(x_.q_tail[0]) + q[6];
    const S yaw = S(x_.q_tail[1]) + q[7];
    S len = S(params_.tail_length_max);
    if constexpr (TailDofs == 3) len = S(x_.q_tail[2]) + q[8];
    const M3<S> gimbal = mul(rot_z(yaw), rot_y(-pitch));
    const V3<S> dir = mul(gimbal, V3<S>{S(-1.0), S(0.0), S(0.0)});
    V3<S> tip_body;
    for (int i = 0; i < 3; ++i) tip_body[i] = S(params_.tail_mount_offset[i]) + len * dir[i];
    const V3<S> tip_rel = mul(f.rot, tip_body);
    for (int i = 0; i < 3; ++i) f.tip[i] = f.p[i] + tip_rel[i];
    f.tip_rot = mul(f.rot, gimbal);
    return f;
  }

  // body: vee(R^T dR); world: vee(dR R^T)
  static Vec3 vee_of(const M3<Dual>& r, bool body) {
    Mat3 val, der;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        val(i, j) = r[i][j].v;
        der(i, j) = r[i][j].d;
      }
    const Mat3 w = body ? Mat3(val.transpose() * der) : Mat3(der * val.transpose());
    return {w(2, 1), w(0, 2), w(1, 0)};
  }

  VecN potential_gradient(const VecN& q) const {
    VecN g;
    for (int i = 0; i < kN; ++i) {
      std::array<Dual, kN> dq;
      for (int k = 0; k < kN; ++k) dq[k] = Dual(q[k], k == i ? 1.0 : 0.0);
      const Frames<Dual> f = frames(dq);
      g[i] = params_.gravity * (params_.body_mass * f.p[2].d + params_.tail_mass * f.tip[2].d);
    }
    return g;
  }

  RobotParams params_;
  SystemState<TailDofs> x_;
};

}  // namespace falltail::testing

#endif  // FALLTAIL_TESTS_LAGRANGIAN_ORACLE_HPP_
