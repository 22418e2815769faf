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

#ifndef FALLTAIL_CLI_HPP_
#define FALLTAIL_CLI_HPP_

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "falltail/io.hpp"

namespace falltail::cli {

/// Process exit statuses.
enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kConfigError = 2,     // bad flags, config file, solution file or mixed report inputs
  kPlanFailure = 3,     // planner did not converge
  kSimAbort = 4,        // simulation stopped on a non-finite state
  kLandingFailure = 5,  // simulation finished but the landing verdict is a failure
};

/// Command-line values that override the config file. Unset means keep.
struct Overrides {
  std::string config_path;
  std::vector<double> yaw, pitch, roll;  // degrees; lists only for batch
  std::optional<double> height, budget, tail_mass_scale;
  bool no_retract = false;
  std::string out;
};

inline ToolkitConfig effective_config(const Overrides& o, bool grid) {
  ToolkitConfig c = o.config_path.empty() ? config_from_json(Json::object()) : load_config(o.config_path);
  if (grid) {
    if (!o.yaw.empty()) c.grid.yaw_deg = o.yaw;
    if (!o.pitch.empty()) c.grid.pitch_deg = o.pitch;
    if (!o.roll.empty()) c.grid.roll_deg = o.roll;
  } else {
    for (const auto* v : {&o.yaw, &o.pitch, &o.roll})
      if (v->size() > 1) throw ConfigError("--yaw/--pitch/--roll take one value outside batch");
    EulerYPR& e = c.scenario.initial_orientation;
    if (!o.yaw.empty()) e.yaw = deg2rad(o.yaw[0]);
    if (!o.pitch.empty()) e.pitch = deg2rad(o.pitch[0]);
    if (!o.roll.empty()) e.roll = deg2rad(o.roll[0]);
  }
  if (o.height) c.scenario.height = *o.height;
  if (o.budget) c.planner.budget = *o.budget;
  if (o.tail_mass_scale) c.scenario.model_error.tail_mass_scale = *o.tail_mass_scale;
  if (o.no_retract) c.scenario.mode = ControllerMode::kNoRetract;
  if (!o.out.empty()) c.output.directory = o.out;
  c.validate();
  return c;
}

inline PlanRecord plan_scenario(const ToolkitConfig& c) {
  const OCProblem problem = make_problem(c.scenario, c.robot, c.planner.budget, c.planner.knot_dt, c.planner.weights);
  PlanRecord rec;
  rec.knot_dt = problem.dt;
  const auto t0 = std::chrono::steady_clock::now();
  rec.solution = solve(problem, c.planner.solver);
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rec.terminal_error = attitude_error(problem.target, rec.solution.states.back().orientation);
  return rec;
}

inline std::filesystem::path out_dir(const ToolkitConfig& c) { return c.output.directory; }

inline int cmd_plan(const Overrides& o, std::ostream& out) {
  const ToolkitConfig c = effective_config(o, false);
  const PlanRecord plan = plan_scenario(c);
  const auto path = out_dir(c) / "solution.json";
  write_file_atomic(path, solution_to_json(plan, c).dump(1) + "\n");
  const PlanningSolution& s = plan.solution;
  for (const auto& w : s.warnings) out << "warning: " << w << "\n";
  out << "plan " << (s.converged ? "converged" : "did NOT converge") << " in " << s.iterations
      << " iterations, stationarity " << s.stationarity << ", terminal attitude error " << plan.terminal_error
      << ", " << plan.seconds << " s\n";
  out << "wrote " << path.string() << "\n";
  return s.converged ? kOk : kPlanFailure;
}

inline int cmd_drop(const Overrides& o, const std::string& solution_path, bool replan, std::ostream& out) {
  const ToolkitConfig c = effective_config(o, false);
  if (replan == !solution_path.empty()) throw ConfigError("drop needs exactly one of --solution FILE or --replan");
  BatchRow row;
  row.scenario = c.scenario;
  TrackingPolicy policy;
  Json solution_hash = nullptr;
  if (replan) {
    const PlanRecord plan = plan_scenario(c);
    write_file_atomic(out_dir(c) / "solution.json", solution_to_json(plan, c).dump(1) + "\n");
    row.plan_converged = plan.solution.converged;
    row.plan_iterations = plan.solution.iterations;
    row.plan_terminal_error = plan.terminal_error;
    row.plan_seconds = plan.seconds;
    policy = TrackingPolicy(plan.solution, plan.knot_dt, c.robot);
  } else {
    const Json j = read_json_file(solution_path);
    const LoadedSolution loaded = solution_from_json(j, c.robot);
    const PlanningState x0 = initial_planning_state(c.scenario);
    if (state_difference(x0, loaded.policy.states.front()).cwiseAbs().maxCoeff() > 1e-9)
      throw ConfigError("solution was planned for a different initial state; use --replan or matching flags");
    row.plan_converged = loaded.converged;
    row.plan_iterations = j.value("iterations", 0);
    row.plan_terminal_error = j.value("terminal_attitude_error", 0.0);
    solution_hash = loaded.config_hash;
    policy = loaded.policy;
  }
  const auto t0 = std::chrono::steady_clock::now();
  const TrajectoryLog log = simulate(c.scenario, policy, c.sim_config());
  const double sim_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  row.verdict = log.verdict;
  row.aborted = log.aborted;

  const std::string hash = config_hash(c);
  Json summary = run_summary_to_json(row, log, sim_seconds, c);
  summary["solution_config_hash"] = solution_hash;
  write_file_atomic(out_dir(c) / "log.csv", log_to_csv(log, hash));
  write_file_atomic(out_dir(c) / "summary.json", summary.dump(1) + "\n");

  const LandingVerdict& v = log.verdict;
  out << std::fixed << std::setprecision(3);
  if (log.aborted) out << "simulation aborted: " << log.abort_reason << "\n";
  out << "landing " << (v.success ? "success" : "FAILURE (" + v.failure_reason + ")") << ", touchdown at "
      << v.touchdown_time << " s, Euler [yaw pitch roll] = [" << rad2deg(v.touchdown_euler.yaw) << ", "
      << rad2deg(v.touchdown_euler.pitch) << ", " << rad2deg(v.touchdown_euler.roll) << "] deg\n";
  out << "wrote " << (out_dir(c) / "log.csv").string() << " and " << (out_dir(c) / "summary.json").string()
      << "\n";
  if (log.aborted) return kSimAbort;
  if (!v.success) return kLandingFailure;
  if (!row.plan_converged) return kPlanFailure;
  return kOk;
}

inline int cmd_batch(const Overrides& o, int jobs, std::ostream& out) {
  const ToolkitConfig c = effective_config(o, true);
  if (jobs < 1) throw ConfigError("--jobs must be >= 1");
  const std::vector<Scenario> grid =
      orientation_grid(c.grid.yaw_deg, c.grid.pitch_deg, c.grid.roll_deg, c.scenario);
  const auto t0 = std::chrono::steady_clock::now();
  const BatchSummary b = batch_run(grid, c.planner, c.sim_config(), jobs);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string hash = config_hash(c);
  const Json summary = batch_to_json(b, c, seconds);
  for (std::size_t i = 0; i < b.rows.size(); ++i) {
    std::ostringstream name;
    name << "scenario_" << std::setw(3) << std::setfill('0') << i << ".json";
    Json row = summary["rows"][i];
    row["config_hash"] = hash;
    write_file_atomic(out_dir(c) / "scenarios" / name.str(), row.dump(1) + "\n");
  }
  write_file_atomic(out_dir(c) / "batch.csv", batch_to_csv(b, hash));
  write_file_atomic(out_dir(c) / "batch_summary.json", summary.dump(1) + "\n");
  int aborted = 0;
  for (const auto& r : b.rows) aborted += r.aborted ? 1 : 0;
  out << b.successes << "/" << b.rows.size() << " landings succeeded, " << b.plan_failures
      << " plans did not converge, " << aborted << " simulations aborted (" << std::fixed << std::setprecision(1)
      << seconds << " s)\n";
  return aborted ? kSimAbort : kOk;
}

inline int cmd_report(const std::vector<std::string>& logs, bool force, const std::string& out_path,
                      std::ostream& out) {
  std::vector<LogTable> tables;
  for (const auto& p : logs) tables.push_back(read_log_csv(p));
  const std::filesystem::path dir = out_path.empty() ? "." : out_path;
  write_file_atomic(dir / "report.csv", report_series_csv(tables, force));
  write_file_atomic(dir / "markers.csv", report_markers_csv(tables, force));
  out << "wrote " << (dir / "report.csv").string() << " and " << (dir / "markers.csv").string() << "\n";
  return kOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Falling-quadruped tail toolkit: plan, simulate and sweep tail-assisted drops."};
  app.require_subcommand(1);

  Overrides o;
  std::string solution;
  bool replan = false, force = false;
  int jobs = 1;
  std::vector<std::string> logs;
  std::string report_out;

  const auto scenario_flags = [&](CLI::App* cmd, bool lists) {
    cmd->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    const char* unit = lists ? "comma-separated list, deg" : "deg";
    cmd->add_option("--yaw", o.yaw, std::string("initial yaw, ") + unit)->delimiter(',');
    cmd->add_option("--pitch", o.pitch, std::string("initial pitch, ") + unit)->delimiter(',');
    cmd->add_option("--roll", o.roll, std::string("initial roll, ") + unit)->delimiter(',');
    cmd->add_option("--height", o.height, "release height of the body CoM, m");
    cmd->add_option("--budget", o.budget, "planning horizon, s");
    cmd->add_option("--tail-mass-scale", o.tail_mass_scale, "simulated tail mass factor");
    cmd->add_flag("--no-retract", o.no_retract, "keep the tail extended (ablation)");
    cmd->add_option("--out", o.out, "output directory");
  };

  CLI::App* plan = app.add_subcommand("plan", "plan a reorientation trajectory and write solution.json");
  scenario_flags(plan, false);
  CLI::App* drop = app.add_subcommand("drop", "simulate one drop; writes log.csv and summary.json");
  scenario_flags(drop, false);
  drop->add_option("--solution", solution, "solution file from the plan command")->check(CLI::ExistingFile);
  drop->add_flag("--replan", replan, "plan for this scenario before simulating");
  CLI::App* batch = app.add_subcommand("batch", "plan and simulate an orientation grid");
  scenario_flags(batch, true);
  batch->add_option("--jobs", jobs, "parallel scenarios");
  CLI::App* report = app.add_subcommand("report", "turn logs into plot-ready series and phase markers");
  report->add_option("logs", logs, "log.csv files")->required()->check(CLI::ExistingFile);
  report->add_flag("--force", force, "combine logs with different config hashes");
  report->add_option("--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*plan) return cmd_plan(o, out);
    if (*drop) return cmd_drop(o, solution, replan, out);
    if (*batch) return cmd_batch(o, jobs, out);
    return cmd_report(logs, force, report_out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InvalidParams& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

}  // namespace falltail::cli

#endif  // FALLTAIL_CLI_HPP_
