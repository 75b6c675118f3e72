#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "haul/sim.hpp"
#include "haul/solver.hpp"

namespace haul {

// Straight-line reference from start to goal: N+1 uniformly spaced poses, all
// holding the segment heading, and N constant nominal controls.
struct ReferencePath {
  std::vector<Pose2> poses;
  std::vector<Control2> controls;
  double Ts = 0.1;

  int steps() const { return static_cast<int>(controls.size()); }
};

struct ObstaclePoint {
  int id = 0;
  Eigen::Vector2d center{0.0, 0.0};
};

struct PlanProblem {
  ReferencePath reference;
  std::vector<ObstaclePoint> obstacles;
  double safety_radius = 0.5;
  Formation formation = Formation::circle(4, 0.35);
  DiagNoise state_noise = DiagNoise::from({1e-1, 1e-1, 2e-2});
  DiagNoise control_noise = DiagNoise::from({1e-1, 1e-1});
  DiagNoise motion_noise = DiagNoise::from({1e-4, 1e-4, 2e-5});
  DiagNoise obstacle_noise = DiagNoise::from({1e-2});
  LMParams lm;
  double v_max = 2.0;
  double omega_max = 2.0;
  double goal_tol = 0.05;
  double heading_tol = 0.05;

  Eigen::Vector2d goal() const { return reference.poses.back().position(); }
};

struct MissionEvent {
  enum Kind {
    Disturbed,
    RobotFailed,
    NoiseEnabled,
    SolverFallback,
    LineSearchFailure,
    ConstraintViolation,
    RotationBudgetExhausted,
    AllRobotsFailed,
  };
  int step = 0;
  Kind kind = Disturbed;
};

// Per-step record of an executed mission. The per-step vectors share length;
// the state observed at termination is kept separately.
struct MissionLog {
  std::vector<Pose2> executed_centroid;                      // estimate before each control
  std::vector<std::vector<std::pair<int, Pose2>>> executed_robots;  // observed (index, pose)
  std::vector<std::vector<Control2>> applied_controls;       // per robot
  std::vector<Control2> centroid_controls;                   // phase-projected centroid control
  std::vector<int> ref_index;                                // waypoint index k during the step
  std::vector<SolveStats> solve_stats;
  std::vector<MissionEvent> events;

  Pose2 final_centroid;
  std::vector<std::pair<int, Pose2>> final_robots;
  bool reached_goal = false;
};

class InfeasibleScheduleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws InfeasibleScheduleError when covering the segment in N steps needs
// more than v_max.
ReferencePath make_initial_path(const Pose2& start, const Eigen::Vector2d& goal, int N, double Ts,
                                double v_max);

// Planning graph for the window k..N: anchor on x_k, pose priors on every
// x_n, control priors and motion factors on every step, obstacle factors on
// x_{k+1}..x_N. Initial values are the reference with x_k = current.
std::pair<FactorGraph, Values> build_step_graph(const PlanProblem& p, int k, const Pose2& current);

// Picks the motion regime: rotate in place when the wrapped bearing toward
// the target is off by more than heading_tol (rotation_dir = sign of the
// error), else translate. At the target position the target's own heading is
// used as the bearing.
Phase decide_phase(const Pose2& current, const Pose2& target, double heading_tol);

// Recovers the phase encoded by a projected control (v * omega == 0).
Phase phase_of(const Control2& u);

struct PlanStepResult {
  Control2 u;                    // phase-projected, clamped
  Phase phase;
  std::vector<Pose2> predicted;  // solved poses x_{k+1}..x_N
  SolveStats stats;              // wall_time covers build + solve + extraction
  bool solver_fallback = false;
  bool linesearch_failed = false;
  bool constraint_violation = false;
};

// Shared post-solve stage: decide the phase against a pose a few steps ahead
// (the solved prediction near obstacles, the reference waypoint elsewhere),
// project the raw control onto that phase — translate keeps the solved speed,
// rotate pivots toward the target bearing — and clamp to actuator limits.
// Writes out.u and out.phase.
void finish_step(const PlanProblem& p, int k, const Pose2& current, bool allow_rotate,
                 const Control2& u_raw, PlanStepResult& out);

// One receding-horizon step: build the window graph, optimize, take u_k,
// project it onto the phase decided against a solved pose a few steps ahead,
// and clamp to actuator limits. A diverged solve degrades to the reference
// control with the fallback flag set.
PlanStepResult plan_step(const PlanProblem& p, int k, const Pose2& current,
                         bool allow_rotate = true);

// Pluggable per-step decision, letting the same mission loop drive the
// factor-graph planner or an MPC baseline.
using Stepper =
    std::function<PlanStepResult(const PlanProblem&, int k, const Pose2& current, bool allow_rotate)>;

// Closed loop: observe robots, fit the centroid, plan, distribute, advance
// the world. The waypoint index k advances only on translate steps; a budget
// of 3N rotation steps guards against livelock. Terminates at the goal
// (goal_tol), at k = N, or when every robot has failed.
MissionLog run_mission(const PlanProblem& p, WorldState& world, const Stepper& stepper = {});

}  // namespace haul
