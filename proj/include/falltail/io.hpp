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

#ifndef FALLTAIL_IO_HPP_
#define FALLTAIL_IO_HPP_

#include <openssl/evp.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "falltail/sim.hpp"
#include "json.hpp"

namespace falltail {

using Json = nlohmann::json;

/// Malformed or invalid configuration, or inputs that do not belong together.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OutputConfig {
  std::string directory = ".";
};

/// Orientation sweep for the batch command, degrees.
struct GridConfig {
  std::vector<double> yaw_deg{-30.0, 0.0, 30.0};
  std::vector<double> pitch_deg{-30.0, 0.0, 30.0};
  std::vector<double> roll_deg{-30.0, 0.0, 30.0};
};

/// Everything a run depends on. Serialized in full into every output.
struct ToolkitConfig {
  std::string robot_preset = "tailed_a1";
  RobotParams robot;
  PlannerConfig planner;
  PhaseConfig phase;
  ContactModel contact;
  Scenario scenario;
  GridConfig grid;
  OutputConfig output;

  SimConfig sim_config() const {
    SimConfig c;
    c.params = robot;
    c.phase = phase;
    c.contact = contact;
    return c;
  }

  void validate() const {
    try {
      robot.validate();
      planner.solver.validate();
      phase.validate();
      contact.validate();
      scenario.validate();
      if (!(planner.budget > 0.0)) throw std::invalid_argument("planner budget must be > 0");
      if (!(planner.knot_dt > 0.0)) throw std::invalid_argument("planner knot_dt must be > 0");
      make_problem(scenario, robot, planner.budget, planner.knot_dt, planner.weights).validate();
      if (grid.yaw_deg.empty() || grid.pitch_deg.empty() || grid.roll_deg.empty())
        throw std::invalid_argument("grid axes must be non-empty");
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline RobotParams robot_preset(const std::string& name) {
  if (name == "tailed_a1") return RobotParams::tailed_a1();
  if (name == "test_platform") return RobotParams::test_platform();
  throw ConfigError("unknown robot preset '" + name + "' (expected tailed_a1 or test_platform)");
}

inline const char* mode_key(ControllerMode m) { return controller_mode_name(m); }

inline ControllerMode mode_from_key(const std::string& s) {
  for (ControllerMode m : {ControllerMode::kPlanned, ControllerMode::kFeedforward, ControllerMode::kNoRetract})
    if (s == controller_mode_name(m)) return m;
  throw ConfigError("unknown controller '" + s + "' (expected planned, feedforward or no_retract)");
}

template <class Derived>
Json to_array(const Eigen::MatrixBase<Derived>& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// Reads the members of one JSON object and rejects the ones nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& child(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void get(const std::string& key, double& out) {
    if (!has(key)) return;
    const Json& v = child(key);
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
    out = v.get<double>();
  }

  void get(const std::string& key, int& out) {
    if (!has(key)) return;
    const Json& v = child(key);
    if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
    out = v.get<int>();
  }

  void get(const std::string& key, bool& out) {
    if (!has(key)) return;
    const Json& v = child(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + " must be true or false");
    out = v.get<bool>();
  }

  void get(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const Json& v = child(key);
    if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
    out = v.get<std::string>();
  }

  void get(const std::string& key, std::optional<double>& out) {
    if (!has(key)) return;
    const Json& v = child(key);
    if (v.is_null()) {
      out.reset();
      return;
    }
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number or null");
    out = v.get<double>();
  }

  void get(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const Json& v = child(key);
    if (!v.is_array()) throw ConfigError(where(key) + " must be an array of numbers");
    out.clear();
    for (const Json& e : v) {
      if (!e.is_number()) throw ConfigError(where(key) + " must be an array of numbers");
      out.push_back(e.get<double>());
    }
  }

  template <int N>
  void get(const std::string& key, Eigen::Matrix<double, N, 1>& out) {
    if (!has(key)) return;
    std::vector<double> v;
    get(key, v);
    if (static_cast<int>(v.size()) != N) throw ConfigError(where(key) + " must have " + std::to_string(N) + " entries");
    for (int i = 0; i < N; ++i) out(i) = v[i];
  }

  void get(const std::string& key, std::array<Vec3, 4>& out) {
    if (!has(key)) return;
    const Json& v = child(key);
    if (!v.is_array() || v.size() != 4) throw ConfigError(where(key) + " must hold four 3-vectors");
    for (std::size_t i = 0; i < 4; ++i) {
      if (!v[i].is_array() || v[i].size() != 3) throw ConfigError(where(key) + " must hold four 3-vectors");
      for (std::size_t k = 0; k < 3; ++k) {
        if (!v[i][k].is_number()) throw ConfigError(where(key) + " must hold numbers");
        out[i](static_cast<Eigen::Index>(k)) = v[i][k].get<double>();
      }
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError("unknown key " + where(key));
  }

 private:
  std::string where(const std::string& key) const { return path_ + "." + key; }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Full effective configuration as JSON. Keys are sorted, so dump() is canonical.
inline Json config_to_json(const ToolkitConfig& c) {
  using detail::to_array;
  Json j;
  const RobotParams& r = c.robot;
  Json feet = Json::array();
  for (const auto& f : r.foot_offsets) feet.push_back(to_array(f));
  j["robot"] = {{"preset", c.robot_preset},
                {"body_mass", r.body_mass},
                {"body_inertia", to_array(r.body_inertia)},
                {"tail_mass", r.tail_mass},
                {"tail_tip_inertia", r.tail_tip_inertia},
                {"tail_length_min", r.tail_length_min},
                {"tail_length_max", r.tail_length_max},
                {"tail_mount_offset", to_array(r.tail_mount_offset)},
                {"tail_torque_min", r.tail_torque_min},
                {"tail_torque_max", r.tail_torque_max},
                {"tail_workspace_half_angle_deg", rad2deg(r.tail_workspace_half_angle)},
                {"gravity", r.gravity},
                {"foot_offsets", feet},
                {"leg_rest_length", r.leg_rest_length},
                {"body_half_extents", to_array(r.body_half_extents)}};
  const SolverSettings& s = c.planner.solver;
  j["solver"] = {{"max_iterations", s.max_iterations},
                 {"stationarity_tolerance", s.stationarity_tolerance},
                 {"cost_tolerance", s.cost_tolerance},
                 {"constraint_tolerance", s.constraint_tolerance},
                 {"regularization_init", s.regularization_init},
                 {"regularization_growth", s.regularization_growth},
                 {"regularization_shrink", s.regularization_shrink},
                 {"regularization_min", s.regularization_min},
                 {"regularization_max", s.regularization_max},
                 {"line_search_factor", s.line_search_factor},
                 {"line_search_min_step", s.line_search_min_step},
                 {"armijo_fraction", s.armijo_fraction},
                 {"penalty_init", s.penalty_init},
                 {"penalty_growth", s.penalty_growth},
                 {"max_outer_updates", s.max_outer_updates},
                 {"barrier_weight", s.barrier_weight},
                 {"barrier_delta_fraction", s.barrier_delta_fraction},
                 {"barrier_delta_shrink", s.barrier_delta_shrink},
                 {"derivative_step", s.derivative_step}};
  const OCProblem& w = c.planner.weights;
  j["planner"] = {{"budget", c.planner.budget},
                  {"knot_dt", c.planner.knot_dt},
                  {"terminal_weight", w.terminal_weight},
                  {"velocity_weights", to_array(w.velocity_weights)},
                  {"torque_weights", to_array(w.torque_weights)},
                  {"terminal_velocity_weights", to_array(w.terminal_velocity_weights)},
                  {"torque_box", w.torque_box},
                  {"workspace_cone", w.workspace_cone}};
  const PhaseConfig& p = c.phase;
  j["phase"] = {{"attitude_tolerance", p.attitude_tolerance},
                {"trigger_height", p.trigger_height ? Json(*p.trigger_height) : Json(nullptr)},
                {"retraction_margin", p.retraction_margin},
                {"retraction_speed", p.retraction_speed},
                {"retraction_force_limit", p.retraction_force_limit},
                {"length_servo_stiffness", p.length_servo_stiffness},
                {"length_servo_damping", p.length_servo_damping},
                {"tail_hold_stiffness", p.tail_hold_stiffness},
                {"tail_hold_damping", p.tail_hold_damping},
                {"retract_attitude_gain", p.retract_attitude_gain},
                {"retract_rate_gain", p.retract_rate_gain},
                {"retract_rate_limit", p.retract_rate_limit},
                {"retract_cone_margin", p.retract_cone_margin},
                {"leg_stiffness", p.leg_stiffness},
                {"leg_damping", p.leg_damping},
                {"leg_angular_damping", p.leg_angular_damping},
                {"leg_force_max", p.leg_force_max},
                {"accel_jump_threshold", p.accel_jump_threshold}};
  j["contact"] = {{"stiffness", c.contact.stiffness},
                  {"damping", c.contact.damping},
                  {"penetration_tolerance", c.contact.penetration_tolerance}};
  const Scenario& sc = c.scenario;
  j["scenario"] = {{"yaw_deg", rad2deg(sc.initial_orientation.yaw)},
                   {"pitch_deg", rad2deg(sc.initial_orientation.pitch)},
                   {"roll_deg", rad2deg(sc.initial_orientation.roll)},
                   {"height", sc.height},
                   {"linear_velocity", to_array(sc.linear_velocity)},
                   {"angular_velocity", to_array(sc.angular_velocity)},
                   {"tail_mass_scale", sc.model_error.tail_mass_scale},
                   {"body_mass_scale", sc.model_error.body_mass_scale},
                   {"body_inertia_scale", sc.model_error.body_inertia_scale},
                   {"friction", sc.friction},
                   {"timestep", sc.timestep},
                   {"max_time", sc.max_time},
                   {"controller", detail::mode_key(sc.mode)},
                   {"settle_rate", sc.settle_rate},
                   {"settle_window", sc.settle_window},
                   {"feet_window", sc.feet_window},
                   {"attitude_limit_deg", rad2deg(sc.attitude_limit)}};
  j["grid"] = {{"yaw_deg", c.grid.yaw_deg}, {"pitch_deg", c.grid.pitch_deg}, {"roll_deg", c.grid.roll_deg}};
  j["output"] = {{"directory", c.output.directory}};
  return j;
}

/// Defaults overridden by whatever `j` sets. Unknown keys and bad types throw.
inline ToolkitConfig config_from_json(const Json& j) {
  ToolkitConfig c;
  detail::ObjectReader top(j, "config");
  if (top.has("robot")) {
    detail::ObjectReader r(top.child("robot"), "robot");
    r.get("preset", c.robot_preset);
    c.robot = detail::robot_preset(c.robot_preset);
    RobotParams& p = c.robot;
    double half_deg = rad2deg(p.tail_workspace_half_angle);
    r.get("body_mass", p.body_mass);
    r.get("body_inertia", p.body_inertia);
    r.get("tail_mass", p.tail_mass);
    r.get("tail_tip_inertia", p.tail_tip_inertia);
    r.get("tail_length_min", p.tail_length_min);
    r.get("tail_length_max", p.tail_length_max);
    r.get("tail_mount_offset", p.tail_mount_offset);
    r.get("tail_torque_min", p.tail_torque_min);
    r.get("tail_torque_max", p.tail_torque_max);
    r.get("tail_workspace_half_angle_deg", half_deg);
    p.tail_workspace_half_angle = deg2rad(half_deg);
    r.get("gravity", p.gravity);
    r.get("foot_offsets", p.foot_offsets);
    r.get("leg_rest_length", p.leg_rest_length);
    r.get("body_half_extents", p.body_half_extents);
    r.finish();
  }
  if (top.has("solver")) {
    detail::ObjectReader r(top.child("solver"), "solver");
    SolverSettings& s = c.planner.solver;
    r.get("max_iterations", s.max_iterations);
    r.get("stationarity_tolerance", s.stationarity_tolerance);
    r.get("cost_tolerance", s.cost_tolerance);
    r.get("constraint_tolerance", s.constraint_tolerance);
    r.get("regularization_init", s.regularization_init);
    r.get("regularization_growth", s.regularization_growth);
    r.get("regularization_shrink", s.regularization_shrink);
    r.get("regularization_min", s.regularization_min);
    r.get("regularization_max", s.regularization_max);
    r.get("line_search_factor", s.line_search_factor);
    r.get("line_search_min_step", s.line_search_min_step);
    r.get("armijo_fraction", s.armijo_fraction);
    r.get("penalty_init", s.penalty_init);
    r.get("penalty_growth", s.penalty_growth);
    r.get("max_outer_updates", s.max_outer_updates);
    r.get("barrier_weight", s.barrier_weight);
    r.get("barrier_delta_fraction", s.barrier_delta_fraction);
    r.get("barrier_delta_shrink", s.barrier_delta_shrink);
    r.get("derivative_step", s.derivative_step);
    r.finish();
  }
  if (top.has("planner")) {
    detail::ObjectReader r(top.child("planner"), "planner");
    OCProblem& w = c.planner.weights;
    r.get("budget", c.planner.budget);
    r.get("knot_dt", c.planner.knot_dt);
    r.get("terminal_weight", w.terminal_weight);
    r.get("velocity_weights", w.velocity_weights);
    r.get("torque_weights", w.torque_weights);
    r.get("terminal_velocity_weights", w.terminal_velocity_weights);
    r.get("torque_box", w.torque_box);
    r.get("workspace_cone", w.workspace_cone);
    r.finish();
  }
  if (top.has("phase")) {
    detail::ObjectReader r(top.child("phase"), "phase");
    PhaseConfig& p = c.phase;
    r.get("attitude_tolerance", p.attitude_tolerance);
    r.get("trigger_height", p.trigger_height);
    r.get("retraction_margin", p.retraction_margin);
    r.get("retraction_speed", p.retraction_speed);
    r.get("retraction_force_limit", p.retraction_force_limit);
    r.get("length_servo_stiffness", p.length_servo_stiffness);
    r.get("length_servo_damping", p.length_servo_damping);
    r.get("tail_hold_stiffness", p.tail_hold_stiffness);
    r.get("tail_hold_damping", p.tail_hold_damping);
    r.get("retract_attitude_gain", p.retract_attitude_gain);
    r.get("retract_rate_gain", p.retract_rate_gain);
    r.get("retract_rate_limit", p.retract_rate_limit);
    r.get("retract_cone_margin", p.retract_cone_margin);
    r.get("leg_stiffness", p.leg_stiffness);
    r.get("leg_damping", p.leg_damping);
    r.get("leg_angular_damping", p.leg_angular_damping);
    r.get("leg_force_max", p.leg_force_max);
    r.get("accel_jump_threshold", p.accel_jump_threshold);
    r.finish();
  }
  if (top.has("contact")) {
    detail::ObjectReader r(top.child("contact"), "contact");
    r.get("stiffness", c.contact.stiffness);
    r.get("damping", c.contact.damping);
    r.get("penetration_tolerance", c.contact.penetration_tolerance);
    r.finish();
  }
  if (top.has("scenario")) {
    detail::ObjectReader r(top.child("scenario"), "scenario");
    Scenario& s = c.scenario;
    double yaw = rad2deg(s.initial_orientation.yaw), pitch = rad2deg(s.initial_orientation.pitch),
           roll = rad2deg(s.initial_orientation.roll), limit = rad2deg(s.attitude_limit);
    std::string mode = detail::mode_key(s.mode);
    r.get("yaw_deg", yaw);
    r.get("pitch_deg", pitch);
    r.get("roll_deg", roll);
    s.initial_orientation = euler_deg(yaw, pitch, roll);
    r.get("height", s.height);
    r.get("linear_velocity", s.linear_velocity);
    r.get("angular_velocity", s.angular_velocity);
    r.get("tail_mass_scale", s.model_error.tail_mass_scale);
    r.get("body_mass_scale", s.model_error.body_mass_scale);
    r.get("body_inertia_scale", s.model_error.body_inertia_scale);
    r.get("friction", s.friction);
    r.get("timestep", s.timestep);
    r.get("max_time", s.max_time);
    r.get("controller", mode);
    s.mode = detail::mode_from_key(mode);
    r.get("settle_rate", s.settle_rate);
    r.get("settle_window", s.settle_window);
    r.get("feet_window", s.feet_window);
    r.get("attitude_limit_deg", limit);
    s.attitude_limit = deg2rad(limit);
    r.finish();
  }
  if (top.has("grid")) {
    detail::ObjectReader r(top.child("grid"), "grid");
    r.get("yaw_deg", c.grid.yaw_deg);
    r.get("pitch_deg", c.grid.pitch_deg);
    r.get("roll_deg", c.grid.roll_deg);
    r.finish();
  }
  if (top.has("output")) {
    detail::ObjectReader r(top.child("output"), "output");
    r.get("directory", c.output.directory);
    r.finish();
  }
  top.finish();
  c.validate();
  return c;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline ToolkitConfig load_config(const std::filesystem::path& path) {
  try {
    return config_from_json(read_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Lowercase hex SHA-1 of a byte string.
inline std::string sha1_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("SHA-1 digest failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

/// Hash of the canonical configuration dump; the output directory is excluded.
inline std::string config_hash(const ToolkitConfig& c) {
  Json j = config_to_json(c);
  j.erase("output");
  return sha1_hex(j.dump());
}

/// Writes to a sibling temporary file, then renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---- Solution files -------------------------------------------------------

inline constexpr const char* kStateLayout =
    "p[3], q_xyzw[4], tail_pitch, tail_yaw, p_dot[3], omega[3], tail_pitch_rate, tail_yaw_rate";
inline constexpr const char* kGainLayout =
    "2x16 row-major over the tangent [dp[3], dtheta[3], dq_tail[2], dp_dot[3], domega[3], dq_tail_dot[2]]";

inline Json state_to_json(const PlanningState& x) {
  const Eigen::Vector4d q = x.orientation.xyzw();
  return Json::array({x.p.x(), x.p.y(), x.p.z(), q(0), q(1), q(2), q(3), x.q_tail(0), x.q_tail(1), x.p_dot.x(),
                      x.p_dot.y(), x.p_dot.z(), x.omega.x(), x.omega.y(), x.omega.z(), x.q_tail_dot(0),
                      x.q_tail_dot(1)});
}

inline PlanningState state_from_json(const Json& a) {
  if (!a.is_array() || a.size() != 17) throw ConfigError("solution state must have 17 numbers");
  std::array<double, 17> v{};
  for (std::size_t i = 0; i < 17; ++i) {
    if (!a[i].is_number()) throw ConfigError("solution state must have 17 numbers");
    v[i] = a[i].get<double>();
  }
  PlanningState x;
  x.p = Vec3(v[0], v[1], v[2]);
  x.orientation = UnitQuaternion::from_xyzw(v[3], v[4], v[5], v[6]);
  x.q_tail << v[7], v[8];
  x.p_dot = Vec3(v[9], v[10], v[11]);
  x.omega = Vec3(v[12], v[13], v[14]);
  x.q_tail_dot << v[15], v[16];
  return x;
}

struct PlanRecord {
  PlanningSolution solution;
  double knot_dt = 0.002;
  double terminal_error = 0.0;
  double seconds = 0.0;
};

inline Json solution_to_json(const PlanRecord& plan, const ToolkitConfig& config) {
  const PlanningSolution& s = plan.solution;
  Json states = Json::array(), controls = Json::array(), gains = Json::array();
  for (const auto& x : s.states) states.push_back(state_to_json(x));
  for (const auto& u : s.controls) controls.push_back(detail::to_array(u));
  for (const auto& k : s.gains) {
    Eigen::Matrix<double, 1, 32> flat;
    for (int r = 0; r < 2; ++r) flat.segment<16>(16 * r) = k.row(r);
    gains.push_back(detail::to_array(flat));
  }
  return {{"config_hash", config_hash(config)},
          {"config", config_to_json(config)},
          {"knot_dt", plan.knot_dt},
          {"converged", s.converged},
          {"iterations", s.iterations},
          {"stationarity", s.stationarity},
          {"cost", s.cost},
          {"terminal_attitude_error", plan.terminal_error},
          {"max_control_violation", s.max_control_violation},
          {"max_state_violation", s.max_state_violation},
          {"solve_seconds", plan.seconds},
          {"warnings", s.warnings},
          {"cost_history", s.cost_history},
          {"state_layout", kStateLayout},
          {"gain_layout", kGainLayout},
          {"states", states},
          {"controls", controls},
          {"gains", gains}};
}

struct LoadedSolution {
  std::string config_hash;
  bool converged = false;
  TrackingPolicy policy;
};

inline LoadedSolution solution_from_json(const Json& j, const RobotParams& params) {
  try {
    LoadedSolution out;
    out.config_hash = j.at("config_hash").get<std::string>();
    out.converged = j.at("converged").get<bool>();
    TrackingPolicy& p = out.policy;
    p.dt = j.at("knot_dt").get<double>();
    p.torque_min = params.tail_torque_min;
    p.torque_max = params.tail_torque_max;
    for (const Json& x : j.at("states")) p.states.push_back(state_from_json(x));
    for (const Json& u : j.at("controls")) {
      const auto v = u.get<std::vector<double>>();
      if (v.size() != 2) throw ConfigError("solution control must have 2 numbers");
      p.controls.emplace_back(v[0], v[1]);
    }
    for (const Json& k : j.at("gains")) {
      const auto v = k.get<std::vector<double>>();
      if (v.size() != 32) throw ConfigError("solution gain must have 32 numbers");
      PlanningGain g;
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 16; ++c) g(r, c) = v[static_cast<std::size_t>(16 * r + c)];
      p.gains.push_back(g);
    }
    p.validate();
    return out;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed solution file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("malformed solution file: ") + e.what());
  }
}

// ---- Trajectory logs ------------------------------------------------------

/**
 * Log CSV columns, one row per physics step. Lines starting with '#' are
 * metadata (`# config_hash=<sha1>`).
 *
 *   t                      s since release
 *   phase                  FLIGHT_REORIENT, FLIGHT_RETRACT or STANCE
 *   x y z                  body CoM, m
 *   qx qy qz qw            body orientation
 *   yaw_deg pitch_deg roll_deg   Z-Y-X Euler angles
 *   tail_pitch tail_yaw    rad
 *   tail_length tail_length_cmd  m
 *   vx vy vz               body CoM velocity, m/s, world
 *   wx wy wz               body rate, rad/s, body frame
 *   tail_pitch_rate tail_yaw_rate tail_length_rate
 *   tau_pitch tau_yaw      applied tail torques, N m
 *   f_length               telescoping force, N
 *   f{i}x f{i}y f{i}z      ground force on foot i (0 FL, 1 FR, 2 RL, 3 RR), N
 *   contact{i}             1 when foot i is detected in contact
 *   attitude_error         1 - cos(angle to target)
 *   torque_cost            0.5 |tau|^2
 */
inline std::vector<std::string> log_columns() {
  std::vector<std::string> c{"t",          "phase",      "x",          "y",         "z",
                             "qx",         "qy",         "qz",         "qw",        "yaw_deg",
                             "pitch_deg",  "roll_deg",   "tail_pitch", "tail_yaw",  "tail_length",
                             "tail_length_cmd", "vx",    "vy",         "vz",        "wx",
                             "wy",         "wz",         "tail_pitch_rate", "tail_yaw_rate", "tail_length_rate",
                             "tau_pitch",  "tau_yaw",    "f_length"};
  for (int i = 0; i < 4; ++i)
    for (const char* axis : {"x", "y", "z"}) c.push_back("f" + std::to_string(i) + axis);
  for (int i = 0; i < 4; ++i) c.push_back("contact" + std::to_string(i));
  c.push_back("attitude_error");
  c.push_back("torque_cost");
  return c;
}

inline std::string log_to_csv(const TrajectoryLog& log, const std::string& hash) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# falltail trajectory log\n# config_hash=" << hash << "\n";
  const auto cols = log_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
  for (const TickRecord& r : log.ticks) {
    const SimState& x = r.state;
    const Eigen::Vector4d q = x.orientation.xyzw();
    const EulerYPR e = euler_from_quat(x.orientation);
    out << r.t << "," << phase_name(r.phase) << "," << x.p.x() << "," << x.p.y() << "," << x.p.z() << "," << q(0)
        << "," << q(1) << "," << q(2) << "," << q(3) << "," << rad2deg(e.yaw) << "," << rad2deg(e.pitch) << ","
        << rad2deg(e.roll) << "," << x.q_tail(0) << "," << x.q_tail(1) << "," << x.q_tail(2) << ","
        << r.length_command << "," << x.p_dot.x() << "," << x.p_dot.y() << "," << x.p_dot.z() << ","
        << x.omega.x() << "," << x.omega.y() << "," << x.omega.z() << "," << x.q_tail_dot(0) << ","
        << x.q_tail_dot(1) << "," << x.q_tail_dot(2) << "," << r.actuation(0) << "," << r.actuation(1) << ","
        << r.actuation(2);
    for (const Vec3& f : r.foot_force) out << "," << f.x() << "," << f.y() << "," << f.z();
    for (bool c : r.contact) out << "," << (c ? 1 : 0);
    out << "," << r.attitude_error << "," << r.torque_cost << "\n";
  }
  return out.str();
}

inline Json verdict_to_json(const LandingVerdict& v) {
  const auto num = [](double d) { return std::isfinite(d) ? Json(d) : Json(nullptr); };
  return {{"success", v.success},
          {"failure_reason", v.failure_reason},
          {"touchdown_time", num(v.touchdown_time)},
          {"touchdown_euler_deg",
           {{"yaw", rad2deg(v.touchdown_euler.yaw)},
            {"pitch", rad2deg(v.touchdown_euler.pitch)},
            {"roll", rad2deg(v.touchdown_euler.roll)}}},
          {"settle_time", num(v.settle_time)},
          {"max_penetration", v.max_penetration},
          {"max_body_penetration", v.max_body_penetration},
          {"early_touchdown", v.early_touchdown}};
}

inline Json run_summary_to_json(const BatchRow& row, const TrajectoryLog& log, double sim_seconds,
                                const ToolkitConfig& config) {
  const auto num = [](double d) { return std::isfinite(d) ? Json(d) : Json(nullptr); };
  return {{"config_hash", config_hash(config)},
          {"config", config_to_json(config)},
          {"plan",
           {{"converged", row.plan_converged},
            {"iterations", row.plan_iterations},
            {"terminal_attitude_error", row.plan_terminal_error},
            {"seconds", row.plan_seconds}}},
          {"verdict", verdict_to_json(log.verdict)},
          {"aborted", log.aborted},
          {"abort_reason", log.abort_reason},
          {"trigger_height", log.trigger_height},
          {"flight_budget", log.flight_budget},
          {"retraction_time", num(log.retraction_time)},
          {"out_of_range", log.out_of_range},
          {"ticks", log.ticks.size()},
          {"sim_seconds", sim_seconds}};
}

// ---- Batch tables ---------------------------------------------------------

/// Batch CSV: one row per scenario, angles in degrees.
inline std::string batch_to_csv(const BatchSummary& b, const std::string& hash) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# falltail batch\n# config_hash=" << hash << "\n";
  out << "yaw_deg,pitch_deg,roll_deg,plan_converged,plan_iterations,plan_terminal_error,plan_seconds,"
         "success,failure_reason,aborted,touchdown_time,td_yaw_deg,td_pitch_deg,td_roll_deg,settle_time,"
         "max_penetration\n";
  for (const BatchRow& r : b.rows) {
    const EulerYPR& e = r.scenario.initial_orientation;
    const EulerYPR& td = r.verdict.touchdown_euler;
    out << rad2deg(e.yaw) << "," << rad2deg(e.pitch) << "," << rad2deg(e.roll) << "," << r.plan_converged << ","
        << r.plan_iterations << "," << r.plan_terminal_error << "," << r.plan_seconds << "," << r.verdict.success
        << "," << r.verdict.failure_reason << "," << r.aborted << "," << r.verdict.touchdown_time << ","
        << rad2deg(td.yaw) << "," << rad2deg(td.pitch) << "," << rad2deg(td.roll) << "," << r.verdict.settle_time
        << "," << r.verdict.max_penetration << "\n";
  }
  return out.str();
}

inline Json batch_to_json(const BatchSummary& b, const ToolkitConfig& config, double seconds) {
  Json rows = Json::array();
  std::vector<Json> plan_failures;
  for (const BatchRow& r : b.rows) {
    const EulerYPR& e = r.scenario.initial_orientation;
    Json initial = {{"yaw", rad2deg(e.yaw)}, {"pitch", rad2deg(e.pitch)}, {"roll", rad2deg(e.roll)}};
    if (!r.plan_converged) plan_failures.push_back(initial);
    rows.push_back({{"initial_euler_deg", initial},
                    {"plan_converged", r.plan_converged},
                    {"plan_iterations", r.plan_iterations},
                    {"aborted", r.aborted},
                    {"verdict", verdict_to_json(r.verdict)}});
  }
  return {{"config_hash", config_hash(config)},
          {"config", config_to_json(config)},
          {"scenarios", b.rows.size()},
          {"successes", b.successes},
          {"landing_failures", static_cast<int>(b.rows.size()) - b.successes},
          {"plan_failures", b.plan_failures},
          {"non_converged_plans", plan_failures},
          {"success_rate", b.success_rate()},
          {"seconds", seconds},
          {"rows", rows}};
}

// ---- Reports --------------------------------------------------------------

/// Parsed log CSV: header hash plus named numeric columns and the phase column.
struct LogTable {
  std::string config_hash;
  std::vector<std::string> columns;
  std::map<std::string, std::vector<double>> numeric;
  std::vector<std::string> phase;

  std::size_t rows() const { return phase.size(); }
  const std::vector<double>& column(const std::string& name) const {
    const auto it = numeric.find(name);
    if (it == numeric.end()) throw ConfigError("log has no column '" + name + "'");
    return it->second;
  }
};

inline LogTable parse_log_csv(std::istream& in, const std::string& name = "log") {
  LogTable t;
  std::string line;
  bool header = false;
  std::size_t phase_index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# config_hash=";
      if (line.rfind(key, 0) == 0) t.config_hash = line.substr(key.size());
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header) {
      t.columns = cells;
      const auto it = std::find(cells.begin(), cells.end(), "phase");
      if (it == cells.end() || cells.empty() || cells[0] != "t") throw ConfigError(name + ": not a trajectory log");
      phase_index = static_cast<std::size_t>(it - cells.begin());
      header = true;
      continue;
    }
    if (cells.size() != t.columns.size()) throw ConfigError(name + ": ragged row");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i == phase_index) {
        t.phase.push_back(cells[i]);
        continue;
      }
      // strtod rather than stod: subnormal values are valid log entries.
      char* end = nullptr;
      const double v = std::strtod(cells[i].c_str(), &end);
      if (cells[i].empty() || end != cells[i].c_str() + cells[i].size())
        throw ConfigError(name + ": bad number '" + cells[i] + "' in column " + t.columns[i]);
      t.numeric[t.columns[i]].push_back(v);
    }
  }
  if (!header) throw ConfigError(name + ": empty log");
  if (t.config_hash.empty()) throw ConfigError(name + ": missing config_hash");
  return t;
}

inline LogTable read_log_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return parse_log_csv(in, path.string());
}

struct PhaseMarker {
  std::size_t log = 0;
  double t = 0.0;
  std::string phase;
};

/// Phase entries, including the initial phase at the first row.
inline std::vector<PhaseMarker> phase_markers(const std::vector<LogTable>& logs) {
  std::vector<PhaseMarker> out;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& t = logs[i].column("t");
    for (std::size_t k = 0; k < logs[i].rows(); ++k)
      if (k == 0 || logs[i].phase[k] != logs[i].phase[k - 1]) out.push_back({i, t[k], logs[i].phase[k]});
  }
  return out;
}

/// Refuses logs from different configurations unless forced.
inline void check_same_config(const std::vector<LogTable>& logs, bool force) {
  if (logs.empty()) throw ConfigError("no logs given");
  for (const auto& l : logs)
    if (l.config_hash != logs.front().config_hash && !force)
      throw ConfigError("logs come from different configurations (" + logs.front().config_hash + " vs " +
                        l.config_hash + "); pass --force to combine them");
}

inline constexpr std::array<const char*, 7> kReportSeries{"yaw_deg",     "pitch_deg", "roll_deg", "tail_length",
                                                           "tail_length_cmd", "tau_pitch", "tau_yaw"};

/**
 * Plot-ready series aligned by time since release: t, then for every log i
 * the columns <name>_<i> plus phase_<i>. Cells past the end of a shorter log
 * are empty.
 */
inline std::string report_series_csv(const std::vector<LogTable>& logs, bool force) {
  check_same_config(logs, force);
  std::size_t longest = 0;
  double dt = 0.0;
  for (const auto& l : logs) {
    const auto& t = l.column("t");
    if (l.rows() > longest) {
      longest = l.rows();
      dt = t.size() > 1 ? t[1] - t[0] : 0.0;
    }
    for (std::size_t k = 0; k < t.size(); ++k)
      if (std::abs(t[k] - t.front() - k * (t.size() > 1 ? t[1] - t[0] : 0.0)) > 1e-9)
        throw ConfigError("log is not uniformly sampled");
  }
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# falltail report\n";
  std::set<std::string> hashes;
  for (const auto& l : logs) hashes.insert(l.config_hash);
  for (const auto& h : hashes) out << "# config_hash=" << h << "\n";
  out << "t";
  for (std::size_t i = 0; i < logs.size(); ++i) {
    for (const char* s : kReportSeries) out << "," << s << "_" << i;
    out << ",phase_" << i;
  }
  out << "\n";
  for (std::size_t k = 0; k < longest; ++k) {
    out << k * dt;
    for (const auto& l : logs) {
      for (const char* s : kReportSeries) {
        out << ",";
        if (k < l.rows()) out << l.column(s)[k];
      }
      out << ",";
      if (k < l.rows()) out << l.phase[k];
    }
    out << "\n";
  }
  return out.str();
}

inline std::string report_markers_csv(const std::vector<LogTable>& logs, bool force) {
  check_same_config(logs, force);
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# falltail phase markers\n";
  std::set<std::string> hashes;
  for (const auto& l : logs) hashes.insert(l.config_hash);
  for (const auto& h : hashes) out << "# config_hash=" << h << "\n";
  out << "log,t,phase\n";
  for (const PhaseMarker& m : phase_markers(logs)) out << m.log << "," << m.t << "," << m.phase << "\n";
  return out.str();
}

}  // namespace falltail

#endif  // FALLTAIL_IO_HPP_
