#pragma once

#include <vector>

#include "haul/geometry.hpp"

namespace haul {

// Placement of one robot around the payload centroid: lever arm l (meters)
// and angular slot psi (radians, centroid frame).
struct FormationSlot {
  double l = 0.0;
  double psi = 0.0;

  FormationSlot() = default;
  FormationSlot(double l_, double psi_);
};

// The centroid moves in exactly one of two regimes per step: pure translation
// along its heading or pure rotation in place. rotation_dir (+1 ccw, -1 cw)
// is meaningful only while rotating.
struct Phase {
  enum Kind { Translate, Rotate } kind = Translate;
  int rotation_dir = 1;

  static Phase translate() { return {Translate, 1}; }
  static Phase rotate(int dir) { return {Rotate, dir >= 0 ? 1 : -1}; }
};

struct Formation {
  std::vector<FormationSlot> slots;

  explicit Formation(std::vector<FormationSlot> s);
  // I slots evenly spaced on a circle: psi_i = 2*pi*i/I, common lever arm.
  static Formation circle(int robots, double lever_arm);

  int size() const { return static_cast<int>(slots.size()); }
};

// One step of the robot motion model: second-order midpoint integration of
// the unicycle, displacement direction sampled at theta + omega*Ts/2.
Pose2 propagate_robot(const Pose2& x, const Control2& u, double Ts);

// One step of the centroid motion model. Exact under phase-split controls:
// pure translation and pure rotation need no integration approximation.
Pose2 propagate_centroid(const Pose2& x, const Control2& u, double Ts);

// One step of the world-frame velocity parametrization of the centroid.
Pose2 propagate_centroid_vel(const Pose2& x, const CentroidVel& v, double Ts);

// Projects a world-frame velocity onto the unicycle control space of pose x.
// Speed sign is chosen by projection onto the heading, so reverse motion maps
// to a negative v rather than a flipped heading.
Control2 vel_to_control(const Pose2& x, const CentroidVel& v);

// Heading robot i must hold: the centroid heading while translating, or the
// local tangent (psi + dir*pi/2 off the centroid heading) while rotating.
double required_robot_heading(double centroid_theta, const FormationSlot& slot, const Phase& phase);

// Maps a centroid control to per-robot controls: v_i = v_c + l_i*omega_c,
// omega_i = omega_c. Requires a phase-consistent input (Translate => omega=0,
// Rotate => v=0); throws std::invalid_argument otherwise. Robots flagged
// inactive receive (0, 0).
std::vector<Control2> distribute_controls(const Control2& u_c, const Formation& formation,
                                          const Phase& phase);
std::vector<Control2> distribute_controls(const Control2& u_c, const Formation& formation,
                                          const Phase& phase, const std::vector<bool>& active);

// Forward kinematics of the rigid assembly: robot poses implied by a centroid
// pose, with headings per required_robot_heading.
std::vector<Pose2> robots_from_centroid(const Pose2& centroid, const Formation& formation,
                                        const Phase& phase);

// Least-squares rigid fit recovering the centroid pose from robot positions
// (poses and slots are index-aligned and must have equal length). Exact
// inverse of robots_from_centroid on noiseless inputs. When the slot offsets
// do not span a direction (single robot, coincident slots) the heading is
// taken from the first robot, which is exact in the translate phase.
// Throws std::runtime_error on empty input.
Pose2 centroid_from_robots(const std::vector<Pose2>& robot_poses, const Formation& formation);

}  // namespace haul
