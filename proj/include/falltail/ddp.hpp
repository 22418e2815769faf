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

#ifndef FALLTAIL_DDP_HPP_
#define FALLTAIL_DDP_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace falltail {

/// Raised when a rollout produces non-finite states.
class SolverDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverSettings {
  int max_iterations = 400;
  double stationarity_tolerance = 1e-3;  // max_k |Q_u|_inf
  double cost_tolerance = 1e-12;         // relative expected reduction treated as stalled
  double constraint_tolerance = 1e-4;

  double regularization_init = 1e-6;
  double regularization_growth = 2.0;
  double regularization_shrink = 0.5;
  double regularization_min = 1e-9;
  double regularization_max = 1e10;

  double line_search_factor = 0.5;
  double line_search_min_step = 1e-4;
  double armijo_fraction = 1e-4;

  double penalty_init = 1.0;
  double penalty_growth = 10.0;
  int max_outer_updates = 20;

  double barrier_weight = 1e-3;
  double barrier_delta_fraction = 0.1;  // of the control range
  double barrier_delta_shrink = 0.1;

  double derivative_step = 1e-6;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) throw std::invalid_argument(std::string("solver setting must be > 0: ") + name);
    };
    if (max_iterations < 1) throw std::invalid_argument("solver setting must be > 0: max_iterations");
    positive(stationarity_tolerance, "stationarity_tolerance");
    positive(cost_tolerance, "cost_tolerance");
    positive(constraint_tolerance, "constraint_tolerance");
    positive(regularization_init, "regularization_init");
    positive(regularization_min, "regularization_min");
    positive(regularization_max, "regularization_max");
    positive(line_search_min_step, "line_search_min_step");
    positive(armijo_fraction, "armijo_fraction");
    positive(penalty_init, "penalty_init");
    positive(barrier_weight, "barrier_weight");
    positive(barrier_delta_fraction, "barrier_delta_fraction");
    positive(derivative_step, "derivative_step");
    if (!(regularization_growth > 1.0)) throw std::invalid_argument("regularization_growth must be > 1");
    if (!(penalty_growth > 1.0)) throw std::invalid_argument("penalty_growth must be > 1");
    if (!(regularization_shrink > 0.0 && regularization_shrink < 1.0))
      throw std::invalid_argument("regularization_shrink must be in (0,1)");
    if (!(line_search_factor > 0.0 && line_search_factor < 1.0))
      throw std::invalid_argument("line_search_factor must be in (0,1)");
    if (!(barrier_delta_shrink > 0.0 && barrier_delta_shrink < 1.0))
      throw std::invalid_argument("barrier_delta_shrink must be in (0,1)");
    if (max_outer_updates < 0) throw std::invalid_argument("max_outer_updates must be >= 0");
  }
};

template <int Nx, int Nu>
struct CostExpansion {
  Eigen::Matrix<double, Nx, 1> lx = Eigen::Matrix<double, Nx, 1>::Zero();
  Eigen::Matrix<double, Nu, 1> lu = Eigen::Matrix<double, Nu, 1>::Zero();
  Eigen::Matrix<double, Nx, Nx> lxx = Eigen::Matrix<double, Nx, Nx>::Zero();
  Eigen::Matrix<double, Nu, Nu> luu = Eigen::Matrix<double, Nu, Nu>::Zero();
  Eigen::Matrix<double, Nu, Nx> lux = Eigen::Matrix<double, Nu, Nx>::Zero();
};

template <class State, int Nx, int Nu>
struct Solution {
  using Control = Eigen::Matrix<double, Nu, 1>;
  using Gain = Eigen::Matrix<double, Nu, Nx>;
  std::vector<State> states;
  std::vector<Control> controls;
  std::vector<Gain> gains;
  /// Augmented cost after the initial rollout and after every accepted
  /// iteration; `cost_segment` says which multiplier/penalty update it
  /// belongs to (costs are only comparable within a segment).
  std::vector<double> cost_history;
  std::vector<int> cost_segment;
  double cost = 0.0;  // objective without constraint terms
  int iterations = 0;
  bool converged = false;
  double stationarity = std::numeric_limits<double>::infinity();
  double max_control_violation = 0.0;
  double max_state_violation = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

/// Relaxed log barrier for z >= 0 with a quadratic extension below delta.
/// Returns value, first and second derivative w.r.t. z.
struct BarrierTerms {
  double value, d1, d2;
};

inline BarrierTerms relaxed_log_barrier(double z, double weight, double delta) {
  if (z > delta) return {-weight * std::log(z), -weight / z, weight / (z * z)};
  const double r = (z - 2.0 * delta) / delta;
  return {weight * (0.5 * (r * r - 1.0) - std::log(delta)), weight * r / delta, weight / (delta * delta)};
}

}  // namespace detail

/**
 * Iterative LQR (Gauss-Newton DDP) for problems with a box on the controls
 * and smooth inequality constraints c(x) <= 0 on the states.
 *
 * Box constraints go through a relaxed log barrier; state constraints
 * through an augmented Lagrangian whose multipliers are refreshed after
 * each inner convergence. The problem type supplies:
 *
 *   kNx, kNu, kNc, State
 *   int horizon() const;  const State& initial_state() const;
 *   State step(const State&, const Control&, int k) const;
 *   Tangent difference(const State& from, const State& to) const;
 *   State retract(const State&, const Tangent&) const;
 *   double stage_cost(x, u, k) const;  double terminal_cost(x) const;
 *   void stage_expansion(x, u, k, CostExpansion&) const;
 *   void terminal_expansion(x, CostExpansion&) const;
 *   void dynamics_jacobians(x, u, k, A, B) const;
 *   Control control_lower() const;  Control control_upper() const;
 *   Constraint constraints(x) const;  ConstraintJacobian constraint_jacobian(x) const;
 */
template <class Problem>
class ConstrainedIlqr {
 public:
  static constexpr int kNx = Problem::kNx;
  static constexpr int kNu = Problem::kNu;
  static constexpr int kNc = Problem::kNc;
  using State = typename Problem::State;
  using Tangent = Eigen::Matrix<double, kNx, 1>;
  using Control = Eigen::Matrix<double, kNu, 1>;
  using Gain = Eigen::Matrix<double, kNu, kNx>;
  using StateMatrix = Eigen::Matrix<double, kNx, kNx>;
  using InputMatrix = Eigen::Matrix<double, kNx, kNu>;
  using Constraint = Eigen::Matrix<double, kNc, 1>;
  using Result = Solution<State, kNx, kNu>;

  ConstrainedIlqr(const Problem& problem, const SolverSettings& settings)
      : problem_(problem), settings_(settings) {
    settings_.validate();
    lower_ = problem_.control_lower();
    upper_ = problem_.control_upper();
    for (int i = 0; i < kNu; ++i) {
      if (!(lower_(i) < upper_(i))) throw std::invalid_argument("control box must have lower < upper");
      const double range = upper_(i) - lower_(i);
      delta_(i) = std::isfinite(range) ? settings_.barrier_delta_fraction * range : 1.0;
    }
  }

  Result solve(std::vector<Control> controls) {
    const int n = problem_.horizon();
    if (n < 1) throw std::invalid_argument("horizon must be >= 1");
    if (static_cast<int>(controls.size()) != n)
      throw std::invalid_argument("initial controls must have one entry per knot");

    multipliers_.assign(n + 1, Constraint::Zero());
    penalty_ = settings_.penalty_init;

    Result out;
    out.controls = std::move(controls);
    out.gains.assign(n, Gain::Zero());
    if (!rollout(out.controls, out.states)) {
      throw SolverDivergence("initial rollout produced a non-finite state");
    }
    double cost = augmented_cost(out.states, out.controls);
    int segment = 0;
    out.cost_history.push_back(cost);
    out.cost_segment.push_back(segment);

    double reg = settings_.regularization_init;
    std::vector<Control> ff(n);
    std::vector<Gain> fb(n);
    std::vector<State> trial_states;
    std::vector<Control> trial_controls;
    int outer_updates = 0;

    for (int iter = 0; iter < settings_.max_iterations; ++iter) {
      double dv1 = 0.0, dv2 = 0.0, stationarity = 0.0;
      while (!backward_pass(out.states, out.controls, reg, ff, fb, dv1, dv2, stationarity)) {
        reg *= settings_.regularization_growth;
        if (reg > settings_.regularization_max) {
          out.warnings.push_back("regularization exceeded its maximum in the backward pass");
          return finish(out, false);
        }
      }
      out.stationarity = stationarity;
      out.gains = fb;

      if (stationarity <= settings_.stationarity_tolerance) {
        if (feasible(out)) return finish(out, true);
        if (outer_updates >= settings_.max_outer_updates) {
          out.warnings.push_back("constraint updates exhausted before feasibility");
          return finish(out, false);
        }
        update_outer(out);
        ++outer_updates;
        ++segment;
        cost = augmented_cost(out.states, out.controls);
        out.cost_history.push_back(cost);
        out.cost_segment.push_back(segment);
        continue;
      }

      // Expected reduction too small to measure: nothing left to gain.
      if (-(dv1 + dv2) <= settings_.cost_tolerance * std::max(1.0, std::abs(cost))) {
        out.warnings.push_back("stalled: expected reduction below tolerance");
        return finish(out, false);
      }

      bool accepted = false;
      for (double alpha = 1.0; alpha >= settings_.line_search_min_step; alpha *= settings_.line_search_factor) {
        if (!forward_pass(out.states, out.controls, ff, fb, alpha, trial_states, trial_controls)) continue;
        const double trial_cost = augmented_cost(trial_states, trial_controls);
        const double expected = -(alpha * dv1 + alpha * alpha * dv2);
        const double actual = cost - trial_cost;
        if (std::isfinite(trial_cost) && actual > 0.0 && actual >= settings_.armijo_fraction * expected) {
          out.states.swap(trial_states);
          out.controls.swap(trial_controls);
          cost = trial_cost;
          accepted = true;
          break;
        }
      }
      ++out.iterations;
      if (accepted) {
        out.cost_history.push_back(cost);
        out.cost_segment.push_back(segment);
        reg = std::max(settings_.regularization_min, reg * settings_.regularization_shrink);
      } else {
        reg *= settings_.regularization_growth;
        if (reg > settings_.regularization_max) {
          out.warnings.push_back("line search failed at maximum regularization");
          return finish(out, false);
        }
      }
    }
    out.warnings.push_back("maximum iterations reached");
    return finish(out, false);
  }

  /// Total cost including barrier and augmented-Lagrangian terms.
  double augmented_cost(const std::vector<State>& xs, const std::vector<Control>& us) const {
    const int n = problem_.horizon();
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
      total += problem_.stage_cost(xs[k], us[k], k) + barrier_value(us[k]);
      if (k > 0) total += penalty_value(xs[k], k);
    }
    return total + problem_.terminal_cost(xs[n]) + penalty_value(xs[n], n);
  }

  /// Roll the nominal controls from the initial state.
  bool rollout(const std::vector<Control>& us, std::vector<State>& xs) const {
    const int n = problem_.horizon();
    xs.resize(n + 1);
    xs[0] = problem_.initial_state();
    for (int k = 0; k < n; ++k) {
      xs[k + 1] = problem_.step(xs[k], us[k], k);
      if (!problem_.all_finite(xs[k + 1])) return false;
    }
    return true;
  }

  /**
   * Gradient of the objective (without constraint terms) with respect to a
   * tangent perturbation of the initial state, controls held fixed.
   */
  Tangent initial_state_gradient(const std::vector<State>& xs, const std::vector<Control>& us) const {
    const int n = problem_.horizon();
    CostExpansion<kNx, kNu> e;
    problem_.terminal_expansion(xs[n], e);
    Tangent lambda = e.lx;
    StateMatrix a;
    InputMatrix b;
    for (int k = n - 1; k >= 0; --k) {
      CostExpansion<kNx, kNu> s;
      problem_.stage_expansion(xs[k], us[k], k, s);
      problem_.dynamics_jacobians(xs[k], us[k], k, a, b);
      lambda = s.lx + a.transpose() * lambda;
    }
    return lambda;
  }

 private:
  double barrier_value(const Control& u) const {
    double v = 0.0;
    for (int i = 0; i < kNu; ++i) {
      if (std::isfinite(upper_(i))) v += detail::relaxed_log_barrier(upper_(i) - u(i), settings_.barrier_weight, delta_(i)).value;
      if (std::isfinite(lower_(i))) v += detail::relaxed_log_barrier(u(i) - lower_(i), settings_.barrier_weight, delta_(i)).value;
    }
    return v;
  }

  double penalty_value(const State& x, int k) const {
    if constexpr (kNc == 0) {
      return 0.0;
    } else {
      const Constraint c = problem_.constraints(x);
      double v = 0.0;
      for (int i = 0; i < kNc; ++i) {
        const double m = std::max(0.0, multipliers_[k](i) + penalty_ * c(i));
        v += (m * m - multipliers_[k](i) * multipliers_[k](i)) / (2.0 * penalty_);
      }
      return v;
    }
  }

  void add_penalty_expansion(const State& x, int k, Tangent& lx, StateMatrix& lxx) const {
    if constexpr (kNc > 0) {
      const Constraint c = problem_.constraints(x);
      const auto jac = problem_.constraint_jacobian(x);
      for (int i = 0; i < kNc; ++i) {
        const double m = multipliers_[k](i) + penalty_ * c(i);
        if (m <= 0.0) continue;
        lx += m * jac.row(i).transpose();
        lxx += penalty_ * jac.row(i).transpose() * jac.row(i);
      }
    }
  }

  void add_barrier_expansion(const Control& u, Control& lu, Eigen::Matrix<double, kNu, kNu>& luu) const {
    for (int i = 0; i < kNu; ++i) {
      if (std::isfinite(upper_(i))) {
        const auto b = detail::relaxed_log_barrier(upper_(i) - u(i), settings_.barrier_weight, delta_(i));
        lu(i) -= b.d1;
        luu(i, i) += b.d2;
      }
      if (std::isfinite(lower_(i))) {
        const auto b = detail::relaxed_log_barrier(u(i) - lower_(i), settings_.barrier_weight, delta_(i));
        lu(i) += b.d1;
        luu(i, i) += b.d2;
      }
    }
  }

  bool backward_pass(const std::vector<State>& xs, const std::vector<Control>& us, double reg,
                     std::vector<Control>& ff, std::vector<Gain>& fb, double& dv1, double& dv2,
                     double& stationarity) const {
    const int n = problem_.horizon();
    CostExpansion<kNx, kNu> term;
    problem_.terminal_expansion(xs[n], term);
    Tangent vx = term.lx;
    StateMatrix vxx = term.lxx;
    add_penalty_expansion(xs[n], n, vx, vxx);
    dv1 = dv2 = stationarity = 0.0;

    StateMatrix a;
    InputMatrix b;
    for (int k = n - 1; k >= 0; --k) {
      CostExpansion<kNx, kNu> e;
      problem_.stage_expansion(xs[k], us[k], k, e);
      if (k > 0) add_penalty_expansion(xs[k], k, e.lx, e.lxx);
      add_barrier_expansion(us[k], e.lu, e.luu);
      problem_.dynamics_jacobians(xs[k], us[k], k, a, b);

      const Tangent qx = e.lx + a.transpose() * vx;
      const Control qu = e.lu + b.transpose() * vx;
      const StateMatrix qxx = e.lxx + a.transpose() * vxx * a;
      const Eigen::Matrix<double, kNu, kNu> quu = e.luu + b.transpose() * vxx * b;
      const Gain qux = e.lux + b.transpose() * vxx * a;

      Eigen::Matrix<double, kNu, kNu> quu_reg = quu;
      quu_reg.diagonal().array() += reg;
      Eigen::LLT<Eigen::Matrix<double, kNu, kNu>> llt(quu_reg);
      if (llt.info() != Eigen::Success) return false;
      ff[k] = -llt.solve(qu);
      fb[k] = -llt.solve(qux);
      if (!ff[k].allFinite() || !fb[k].allFinite()) return false;

      stationarity = std::max(stationarity, qu.template lpNorm<Eigen::Infinity>());
      dv1 += ff[k].dot(qu);
      dv2 += 0.5 * ff[k].dot(quu * ff[k]);

      vx = qx + fb[k].transpose() * quu * ff[k] + fb[k].transpose() * qu + qux.transpose() * ff[k];
      vxx = qxx + fb[k].transpose() * quu * fb[k] + fb[k].transpose() * qux + qux.transpose() * fb[k];
      vxx = 0.5 * (vxx + vxx.transpose()).eval();
    }
    return true;
  }

  bool forward_pass(const std::vector<State>& xs, const std::vector<Control>& us,
                    const std::vector<Control>& ff, const std::vector<Gain>& fb, double alpha,
                    std::vector<State>& new_xs, std::vector<Control>& new_us) const {
    const int n = problem_.horizon();
    new_xs.resize(n + 1);
    new_us.resize(n);
    new_xs[0] = xs[0];
    for (int k = 0; k < n; ++k) {
      new_us[k] = us[k] + alpha * ff[k] + fb[k] * problem_.difference(xs[k], new_xs[k]);
      new_xs[k + 1] = problem_.step(new_xs[k], new_us[k], k);
      if (!problem_.all_finite(new_xs[k + 1])) return false;
    }
    return true;
  }

  bool feasible(Result& out) const {
    measure_violation(out);
    return out.max_control_violation <= settings_.constraint_tolerance &&
           out.max_state_violation <= settings_.constraint_tolerance;
  }

  void measure_violation(Result& out) const {
    out.max_control_violation = 0.0;
    out.max_state_violation = 0.0;
    for (const Control& u : out.controls) {
      out.max_control_violation =
          std::max({out.max_control_violation, (u - upper_).maxCoeff(), (lower_ - u).maxCoeff()});
    }
    if constexpr (kNc > 0) {
      for (std::size_t k = 1; k < out.states.size(); ++k) {
        out.max_state_violation = std::max(out.max_state_violation, problem_.constraints(out.states[k]).maxCoeff());
      }
    }
  }

  void update_outer(const Result& out) {
    if (out.max_state_violation > settings_.constraint_tolerance) {
      if constexpr (kNc > 0) {
        for (std::size_t k = 1; k < out.states.size(); ++k) {
          const Constraint c = problem_.constraints(out.states[k]);
          multipliers_[k] = (multipliers_[k] + penalty_ * c).cwiseMax(0.0);
        }
      }
      penalty_ *= settings_.penalty_growth;
    }
    if (out.max_control_violation > settings_.constraint_tolerance) delta_ *= settings_.barrier_delta_shrink;
  }

  Result& finish(Result& out, bool converged) const {
    out.converged = converged;
    measure_violation(out);
    out.cost = 0.0;
    const int n = problem_.horizon();
    for (int k = 0; k < n; ++k) out.cost += problem_.stage_cost(out.states[k], out.controls[k], k);
    out.cost += problem_.terminal_cost(out.states[n]);
    return out;
  }

  const Problem& problem_;
  SolverSettings settings_;
  Control lower_, upper_;
  Control delta_ = Control::Ones();
  std::vector<Constraint> multipliers_;
  double penalty_ = 1.0;
};

}  // namespace falltail

#endif  // FALLTAIL_DDP_HPP_
