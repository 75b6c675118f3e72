#include "haul/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace haul {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Wrapped heading error toward the target position; at the target position
// itself the target's own heading is the reference.
double heading_error(const Pose2& current, const Pose2& target) {
  const double dx = target.x - current.x;
  const double dy = target.y - current.y;
  double desired;
  if (dx * dx + dy * dy < 1e-12)
    desired = target.theta;
  else
    desired = std::atan2(dy, dx);
  return wrap_angle(desired - current.theta);
}

}  // namespace

ReferencePath make_initial_path(const Pose2& start, const Eigen::Vector2d& goal, int N, double Ts,
                                double v_max) {
  if (N < 1) throw std::invalid_argument("reference path needs at least one step");
  if (!(Ts > 0.0)) throw std::invalid_argument("control period must be positive");
  if (!(v_max > 0.0)) throw std::invalid_argument("speed limit must be positive");
  const Eigen::Vector2d d = goal - start.position();
  const double dist = d.norm();
  if (!std::isfinite(dist)) throw std::invalid_argument("non-finite goal");

  ReferencePath ref;
  ref.Ts = Ts;
  ref.poses.reserve(N + 1);
  ref.controls.reserve(N);
  if (dist < 1e-12) {
    for (int n = 0; n <= N; ++n) ref.poses.push_back(start);
    ref.controls.assign(N, Control2{0.0, 0.0});
    return ref;
  }

  const double speed = dist / (N * Ts);
  if (speed > v_max)
    throw InfeasibleScheduleError("segment needs speed " + std::to_string(speed) +
                                  " above the limit " + std::to_string(v_max));
  const double heading = std::atan2(d.y(), d.x());
  for (int n = 0; n <= N; ++n) {
    const Eigen::Vector2d pos = start.position() + (static_cast<double>(n) / N) * d;
    ref.poses.emplace_back(pos.x(), pos.y(), heading);
  }
  ref.controls.assign(N, Control2{speed, 0.0});
  return ref;
}

std::pair<FactorGraph, Values> build_step_graph(const PlanProblem& p, int k,
                                                const Pose2& current) {
  const int N = p.reference.steps();
  if (k < 0 || k >= N) throw std::out_of_range("window start outside the reference path");
  const int H = N - k;
  const int J = static_cast<int>(p.obstacles.size());

  Values v(k, H + 1, k, H);
  for (int n = k; n <= N; ++n) v.pose(n) = p.reference.poses[n];
  for (int n = k; n < N; ++n) v.control(n) = p.reference.controls[n];
  v.pose(k) = current;

  FactorGraph g;
  g.reserve(2 * H + 1, 3 * H + 2 + J * H);
  g.add_variable(pose_key(k));
  for (int n = k; n < N; ++n) {
    g.add_variable(control_key(n));
    g.add_variable(pose_key(n + 1));
  }

  g.add_factor(make_anchor(k, current));
  g.add_factor(make_pose_prior(k, p.reference.poses[k], p.state_noise));
  for (int n = k; n < N; ++n) {
    g.add_factor(make_control_prior(n, p.reference.controls[n], p.control_noise));
    g.add_factor(make_motion(n, p.reference.Ts, p.motion_noise));
    g.add_factor(make_pose_prior(n + 1, p.reference.poses[n + 1], p.state_noise));
    for (const ObstaclePoint& ob : p.obstacles)
      g.add_factor(make_obstacle(n + 1, ob.center, p.safety_radius, p.obstacle_noise));
  }
  return {std::move(g), std::move(v)};
}

Phase decide_phase(const Pose2& current, const Pose2& target, double heading_tol) {
  const double err = heading_error(current, target);
  if (std::abs(err) > heading_tol) return Phase::rotate(err > 0.0 ? 1 : -1);
  return Phase::translate();
}

Phase phase_of(const Control2& u) {
  if (u.omega != 0.0) return Phase::rotate(u.omega > 0.0 ? 1 : -1);
  return Phase::translate();
}

PlanStepResult plan_step(const PlanProblem& p, int k, const Pose2& current, bool allow_rotate) {
  const auto t0 = std::chrono::steady_clock::now();
  const int N = p.reference.steps();

  PlanStepResult out;
  Control2 u_raw;
  auto [graph, init] = build_step_graph(p, k, current);
  try {
    auto [vals, stats] = lm_optimize(graph, init, p.lm);
    out.stats = stats;
    u_raw = vals.control(k);
    out.predicted.reserve(N - k);
    for (int n = k + 1; n <= N; ++n) out.predicted.push_back(vals.pose(n));
  } catch (const SolverDivergedError& e) {
    out.stats = e.stats;
    out.solver_fallback = true;
    u_raw = p.reference.controls[k];
    out.predicted.assign(p.reference.poses.begin() + k + 1, p.reference.poses.end());
  }

  finish_step(p, k, current, allow_rotate, u_raw, out);
  out.stats.wall_time = seconds_since(t0);
  return out;
}

void finish_step(const PlanProblem& p, int k, const Pose2& current, bool allow_rotate,
                 const Control2& u_raw, PlanStepResult& out) {
  // Phase target, a few steps ahead (one step barely moves). Default to the
  // reference waypoint: the window optimum tolerates a standing lateral
  // offset (heading deviations cost far more than position ones), so only
  // the reference pulls that offset back out. Defer to the solved window
  // near obstacles (it is what detours) and when the waypoint is not ahead
  // of the assembly (e.g. shoved past it — predictions always run forward
  // from the anchor, so the reference catches up without a half-turn).
  constexpr int kLookahead = 3;
  const int N = p.reference.steps();
  const double influence = 2.0 * p.safety_radius;
  bool near_obstacle = false;
  for (const ObstaclePoint& ob : p.obstacles)
    if ((ob.center - current.position()).norm() < influence) {
      near_obstacle = true;
      break;
    }
  Pose2 target = p.reference.poses[std::min(k + kLookahead, N)];
  const double ahead = (target.x - current.x) * std::cos(current.theta) +
                       (target.y - current.y) * std::sin(current.theta);
  if (!out.predicted.empty() && (near_obstacle || ahead <= 0.0)) {
    const int ti = std::min<int>(kLookahead, static_cast<int>(out.predicted.size())) - 1;
    target = out.predicted[ti];
  }

  Phase phase = allow_rotate ? decide_phase(current, target, p.heading_tol) : Phase::translate();
  if (phase.kind == Phase::Rotate) {
    // Pivot straight toward the target bearing. The solved turn rate is no
    // use here: the window never plans a pivot in place (motion factors make
    // that expensive), so its omega is a gentle arc rate that would leave the
    // assembly spinning in sub-milliradian increments.
    const double omega = heading_error(current, target) / p.reference.Ts;
    out.u = {0.0, std::clamp(omega, -p.omega_max, p.omega_max)};
    phase = Phase::rotate(out.u.omega >= 0.0 ? 1 : -1);
  } else {
    out.u = {std::clamp(u_raw.v, -p.v_max, p.v_max), 0.0};
  }
  out.phase = phase;
}

MissionLog run_mission(const PlanProblem& p, WorldState& world, const Stepper& stepper) {
  const int N = p.reference.steps();
  const double Ts = p.reference.Ts;
  if (static_cast<int>(world.robot_poses.size()) != p.formation.size())
    throw std::invalid_argument("world team size must match the formation");

  MissionLog log;
  const Eigen::Vector2d goal = p.goal();
  int k = 0;
  int rotate_budget = 3 * N;
  std::size_t drained = world.fired.size();

  for (;;) {
    auto obs = observe(world);
    if (obs.empty()) {
      log.events.push_back({world.step_count, MissionEvent::AllRobotsFailed});
      if (!log.executed_centroid.empty()) log.final_centroid = log.executed_centroid.back();
      break;
    }

    std::vector<Pose2> poses;
    std::vector<FormationSlot> slots;
    poses.reserve(obs.size());
    slots.reserve(obs.size());
    for (const auto& [i, pose] : obs) {
      poses.push_back(pose);
      slots.push_back(p.formation.slots[i]);
    }
    const Pose2 current = centroid_from_robots(poses, Formation(std::move(slots)));

    if ((current.position() - goal).norm() <= p.goal_tol) {
      log.final_centroid = current;
      log.final_robots = obs;
      log.reached_goal = true;
      break;
    }
    if (k >= N) {
      log.final_centroid = current;
      log.final_robots = obs;
      break;
    }

    PlanStepResult d = stepper ? stepper(p, k, current, rotate_budget > 0)
                               : plan_step(p, k, current, rotate_budget > 0);

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<bool> active(p.formation.size(), false);
    for (const auto& [i, pose] : obs) active[i] = true;
    std::vector<Control2> controls = distribute_controls(d.u, p.formation, d.phase, active);
    std::vector<double> headings(p.formation.size());
    for (int i = 0; i < p.formation.size(); ++i)
      headings[i] = required_robot_heading(current.theta, p.formation.slots[i], d.phase);
    d.stats.wall_time += seconds_since(t0);

    log.executed_centroid.push_back(current);
    log.executed_robots.push_back(obs);
    log.applied_controls.push_back(controls);
    log.centroid_controls.push_back(d.u);
    log.ref_index.push_back(k);
    log.solve_stats.push_back(d.stats);
    if (d.solver_fallback) log.events.push_back({world.step_count, MissionEvent::SolverFallback});
    if (d.linesearch_failed)
      log.events.push_back({world.step_count, MissionEvent::LineSearchFailure});
    if (d.constraint_violation)
      log.events.push_back({world.step_count, MissionEvent::ConstraintViolation});

    world = world_step(world, controls, headings, Ts);
    for (; drained < world.fired.size(); ++drained) {
      const auto& [s, kind] = world.fired[drained];
      MissionEvent::Kind mk = kind == WorldEventKind::Disturbed    ? MissionEvent::Disturbed
                              : kind == WorldEventKind::RobotFailed ? MissionEvent::RobotFailed
                                                                    : MissionEvent::NoiseEnabled;
      log.events.push_back({s, mk});
    }

    if (d.phase.kind == Phase::Rotate) {
      if (--rotate_budget == 0)
        log.events.push_back({world.step_count, MissionEvent::RotationBudgetExhausted});
    } else {
      ++k;
    }
  }
  return log;
}

}  // namespace haul
