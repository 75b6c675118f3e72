#include "haul/sim.hpp"

#include <cmath>

namespace haul {

EventScript::EventScript(std::vector<ScriptedEvent> events) : events_(std::move(events)) {
  int prev = -1;
  for (const ScriptedEvent& e : events_) {
    if (e.trigger_step < 0) throw std::invalid_argument("event trigger step must be >= 0");
    if (e.trigger_step <= prev) throw std::invalid_argument("event trigger steps must be strictly increasing");
    prev = e.trigger_step;
    if (const auto* noise = std::get_if<NoiseOnEvent>(&e.action)) {
      if (noise->sigma_pos < 0.0 || noise->sigma_theta < 0.0)
        throw std::invalid_argument("noise sigmas must be >= 0");
    }
  }
}

int WorldState::active_count() const {
  int n = 0;
  for (bool f : failed)
    if (!f) ++n;
  return n;
}

WorldState make_world(const std::vector<Pose2>& robots, const EventScript& script,
                      std::uint64_t seed) {
  if (robots.empty()) throw std::invalid_argument("world needs at least one robot");
  for (const ScriptedEvent& e : script.events()) {
    if (const auto* fail = std::get_if<FailEvent>(&e.action)) {
      if (fail->robot < 0 || fail->robot >= static_cast<int>(robots.size()))
        throw std::invalid_argument("fail event names a robot outside the team");
    }
  }
  WorldState w;
  w.robot_poses = robots;
  w.failed.assign(robots.size(), false);
  w.rng_seed = seed;
  w.rng.seed(seed);
  w.script = script;
  return w;
}

namespace {

void apply_disturb(WorldState& w, const DisturbEvent& d) {
  // Rigid transform: rotate active positions about their mean by dtheta,
  // then shift everything by the offset. Headings turn with the assembly.
  Eigen::Vector2d mean{0.0, 0.0};
  int n = 0;
  for (std::size_t i = 0; i < w.robot_poses.size(); ++i) {
    if (w.failed[i]) continue;
    mean += w.robot_poses[i].position();
    ++n;
  }
  if (n == 0) return;
  mean /= n;
  const double c = std::cos(d.dtheta);
  const double s = std::sin(d.dtheta);
  for (std::size_t i = 0; i < w.robot_poses.size(); ++i) {
    if (w.failed[i]) continue;
    Pose2& p = w.robot_poses[i];
    const Eigen::Vector2d r = p.position() - mean;
    p.x = mean.x() + c * r.x() - s * r.y() + d.offset.x();
    p.y = mean.y() + s * r.x() + c * r.y() + d.offset.y();
    p.theta = wrap_angle(p.theta + d.dtheta);
  }
}

}  // namespace

WorldState world_step(const WorldState& state, const std::vector<Control2>& controls,
                      const std::vector<double>& headings, double Ts) {
  if (controls.size() != state.robot_poses.size() || headings.size() != state.robot_poses.size())
    throw std::invalid_argument("world_step needs one control and heading per robot");

  WorldState w = state;
  for (std::size_t i = 0; i < w.robot_poses.size(); ++i) {
    if (w.failed[i]) continue;
    Pose2 p = w.robot_poses[i];
    p.theta = wrap_angle(headings[i]);
    w.robot_poses[i] = propagate_robot(p, controls[i], Ts);
  }

  const auto& events = w.script.events();
  while (w.next_event < events.size() && events[w.next_event].trigger_step == w.step_count) {
    const ScriptedEvent& e = events[w.next_event];
    if (const auto* d = std::get_if<DisturbEvent>(&e.action)) {
      apply_disturb(w, *d);
      w.fired.emplace_back(w.step_count, WorldEventKind::Disturbed);
    } else if (const auto* f = std::get_if<FailEvent>(&e.action)) {
      w.failed[f->robot] = true;
      w.fired.emplace_back(w.step_count, WorldEventKind::RobotFailed);
    } else if (const auto* n = std::get_if<NoiseOnEvent>(&e.action)) {
      w.noise_active = true;
      w.sigma_pos = n->sigma_pos;
      w.sigma_theta = n->sigma_theta;
      w.fired.emplace_back(w.step_count, WorldEventKind::NoiseEnabled);
    }
    ++w.next_event;
  }

  ++w.step_count;
  w.time += Ts;
  return w;
}

std::vector<std::pair<int, Pose2>> observe(WorldState& state) {
  std::vector<std::pair<int, Pose2>> out;
  out.reserve(state.robot_poses.size());
  // Fresh distributions per call: no spare-sample carryover, so the output
  // is a pure function of the RNG position.
  std::normal_distribution<double> pos_noise(0.0, state.sigma_pos);
  std::normal_distribution<double> theta_noise(0.0, state.sigma_theta);
  for (std::size_t i = 0; i < state.robot_poses.size(); ++i) {
    if (state.failed[i]) continue;
    Pose2 p = state.robot_poses[i];
    if (state.noise_active) {
      p.x += pos_noise(state.rng);
      p.y += pos_noise(state.rng);
      p.theta = wrap_angle(p.theta + theta_noise(state.rng));
    }
    out.emplace_back(static_cast<int>(i), p);
  }
  return out;
}

}  // namespace haul
