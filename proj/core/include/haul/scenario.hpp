#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "haul/mpc.hpp"

namespace haul {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One benchmark configuration: course, team, solver, tuning, scripted events.
// Loaded from JSON with a closed schema (unknown keys are errors, so typos
// fail loudly instead of silently running defaults).
struct ScenarioConfig {
  std::string name;
  SolverKind solver = SolverKind::Ours;
  std::uint64_t seed = 1;

  int robots = 4;
  double lever_arm = 0.35;
  Pose2 start;
  Eigen::Vector2d goal{0.0, 0.0};
  int steps = 90;
  double period = 0.1;
  double v_max = 2.0;
  double omega_max = 2.0;
  double goal_tol = 0.05;
  double heading_tol = 0.05;
  double safety_radius = 0.5;
  std::vector<Eigen::Vector2d> obstacles;

  // Factor variances (diagonal).
  Eigen::Vector3d state_var{1e-1, 1e-1, 2e-2};
  Eigen::Vector2d control_var{1e-1, 1e-1};
  Eigen::Vector3d motion_var{1e-4, 1e-4, 2e-5};
  double obstacle_var = 1e-2;

  LMParams lm;
  std::optional<MpcParams> mpc;  // per-solver defaults when absent
  std::vector<ScriptedEvent> events;
};

const char* solver_name(SolverKind kind);
SolverKind solver_from_name(const std::string& name);

ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);

PlanProblem to_plan_problem(const ScenarioConfig& cfg);
// MPC tuning actually in effect: the explicit block, else the defaults of the
// configured solver.
MpcParams effective_mpc(const ScenarioConfig& cfg);
// Fresh world with robots placed on their formation slots around the start.
WorldState make_world(const ScenarioConfig& cfg);

// FNV-1a over the canonical serialization of everything that shapes the run
// except name and seed: runs differing only in labeling or randomness share a
// hash. 16 lowercase hex digits.
std::string config_hash(const ScenarioConfig& cfg);

}  // namespace haul
