#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "haul/kinematics.hpp"

namespace haul {

// Rigid displacement of the whole assembly (rotation about the active
// centroid plus a translation), applied after the motion of the trigger step.
struct DisturbEvent {
  Eigen::Vector2d offset{0.0, 0.0};
  double dtheta = 0.0;
};

// Permanently freezes one robot; it stops moving and reporting.
struct FailEvent {
  int robot = 0;
};

// Enables additive Gaussian measurement noise from the trigger step on.
struct NoiseOnEvent {
  double sigma_pos = 0.0;
  double sigma_theta = 0.0;
};

struct ScriptedEvent {
  int trigger_step = 0;
  std::variant<DisturbEvent, FailEvent, NoiseOnEvent> action;
};

// Ordered script; trigger steps must be strictly increasing and nonnegative.
class EventScript {
 public:
  EventScript() = default;
  explicit EventScript(std::vector<ScriptedEvent> events);

  const std::vector<ScriptedEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }

 private:
  std::vector<ScriptedEvent> events_;
};

enum class WorldEventKind { Disturbed, RobotFailed, NoiseEnabled };

struct WorldState {
  std::vector<Pose2> robot_poses;
  std::vector<bool> failed;
  double time = 0.0;
  int step_count = 0;
  std::uint64_t rng_seed = 0;
  std::mt19937_64 rng;
  EventScript script;
  std::size_t next_event = 0;
  bool noise_active = false;
  double sigma_pos = 0.0;
  double sigma_theta = 0.0;
  std::vector<std::pair<int, WorldEventKind>> fired;  // (step, kind), cumulative

  int active_count() const;
};

WorldState make_world(const std::vector<Pose2>& robots, const EventScript& script,
                      std::uint64_t seed);

// Advances active robots one control period: each heading is first snapped to
// its commanded value (the platforms servo heading much faster than the
// control rate), then the unicycle model is integrated. Scripted events whose
// trigger equals the executed step index fire after the motion.
WorldState world_step(const WorldState& state, const std::vector<Control2>& controls,
                      const std::vector<double>& headings, double Ts);

// Measured poses of active robots as (index, pose), ascending by index.
// Draws from the state's RNG when noise is active, so the state mutates.
std::vector<std::pair<int, Pose2>> observe(WorldState& state);

}  // namespace haul
