#include "haul/kinematics.hpp"

#include <cmath>
#include <stdexcept>

namespace haul {

namespace {

void check_ts(double Ts) {
  if (!(Ts > 0.0)) {
    throw std::domain_error("propagate: Ts must be > 0");
  }
}

}  // namespace

FormationSlot::FormationSlot(double l_, double psi_) : l(l_), psi(wrap_angle(psi_)) {
  if (!(l >= 0.0)) {
    throw std::invalid_argument("FormationSlot: lever arm must be >= 0");
  }
}

Formation::Formation(std::vector<FormationSlot> s) : slots(std::move(s)) {
  if (slots.empty()) {
    throw std::invalid_argument("Formation: needs at least one slot");
  }
}

Formation Formation::circle(int robots, double lever_arm) {
  if (robots < 1) {
    throw std::invalid_argument("Formation::circle: robots must be >= 1");
  }
  std::vector<FormationSlot> slots;
  slots.reserve(robots);
  for (int i = 0; i < robots; ++i) {
    slots.emplace_back(lever_arm, 2.0 * M_PI * i / robots);
  }
  return Formation(std::move(slots));
}

Pose2 propagate_robot(const Pose2& x, const Control2& u, double Ts) {
  check_ts(Ts);
  const double mid = x.theta + 0.5 * u.omega * Ts;
  return Pose2(x.x + Ts * u.v * std::cos(mid), x.y + Ts * u.v * std::sin(mid),
               x.theta + Ts * u.omega);
}

Pose2 propagate_centroid(const Pose2& x, const Control2& u, double Ts) {
  check_ts(Ts);
  return Pose2(x.x + Ts * u.v * std::cos(x.theta), x.y + Ts * u.v * std::sin(x.theta),
               x.theta + Ts * u.omega);
}

Pose2 propagate_centroid_vel(const Pose2& x, const CentroidVel& v, double Ts) {
  check_ts(Ts);
  return Pose2(x.x + Ts * v.xdot, x.y + Ts * v.ydot, x.theta + Ts * v.thetadot);
}

Control2 vel_to_control(const Pose2& x, const CentroidVel& v) {
  const double speed = std::hypot(v.xdot, v.ydot);
  const double along = v.xdot * std::cos(x.theta) + v.ydot * std::sin(x.theta);
  return {along >= 0.0 ? speed : -speed, v.thetadot};
}

double required_robot_heading(double centroid_theta, const FormationSlot& slot,
                              const Phase& phase) {
  if (phase.kind == Phase::Translate) {
    return wrap_angle(centroid_theta);
  }
  return wrap_angle(centroid_theta + slot.psi + phase.rotation_dir * M_PI_2);
}

std::vector<Control2> distribute_controls(const Control2& u_c, const Formation& formation,
                                          const Phase& phase) {
  return distribute_controls(u_c, formation, phase, std::vector<bool>(formation.slots.size(), true));
}

std::vector<Control2> distribute_controls(const Control2& u_c, const Formation& formation,
                                          const Phase& phase, const std::vector<bool>& active) {
  if (phase.kind == Phase::Translate ? (u_c.omega != 0.0) : (u_c.v != 0.0)) {
    throw std::invalid_argument("distribute_controls: control inconsistent with phase");
  }
  if (active.size() != formation.slots.size()) {
    throw std::invalid_argument("distribute_controls: active mask length mismatch");
  }
  std::vector<Control2> out(formation.slots.size());
  for (size_t i = 0; i < formation.slots.size(); ++i) {
    if (!active[i]) {
      out[i] = {0.0, 0.0};
      continue;
    }
    // The lever term uses |omega|: the rotation direction is already encoded
    // in the tangent heading each robot pivots to (psi +/- pi/2), so a robot
    // always drives forward along it. A signed term would reverse the robot
    // while the tangent also flips, moving it against the rotation.
    out[i] = {u_c.v + formation.slots[i].l * std::abs(u_c.omega), u_c.omega};
  }
  return out;
}

std::vector<Pose2> robots_from_centroid(const Pose2& centroid, const Formation& formation,
                                        const Phase& phase) {
  std::vector<Pose2> out;
  out.reserve(formation.slots.size());
  for (const FormationSlot& slot : formation.slots) {
    const double a = centroid.theta + slot.psi;
    out.emplace_back(centroid.x + slot.l * std::cos(a), centroid.y + slot.l * std::sin(a),
                     required_robot_heading(centroid.theta, slot, phase));
  }
  return out;
}

Pose2 centroid_from_robots(const std::vector<Pose2>& robot_poses, const Formation& formation) {
  const size_t m = robot_poses.size();
  if (m == 0) {
    throw std::runtime_error("centroid_from_robots: no active robots");
  }
  if (formation.slots.size() != m) {
    throw std::invalid_argument("centroid_from_robots: pose/slot length mismatch");
  }

  Eigen::Vector2d mean_p = Eigen::Vector2d::Zero();
  Eigen::Vector2d mean_o = Eigen::Vector2d::Zero();
  for (size_t i = 0; i < m; ++i) {
    mean_p += robot_poses[i].position();
    mean_o += Eigen::Vector2d(formation.slots[i].l * std::cos(formation.slots[i].psi),
                              formation.slots[i].l * std::sin(formation.slots[i].psi));
  }
  mean_p /= static_cast<double>(m);
  mean_o /= static_cast<double>(m);

  // 2D orthogonal Procrustes: heading maximizing alignment of centered slot
  // offsets with centered robot positions.
  double s_dot = 0.0, s_cross = 0.0, spread = 0.0;
  for (size_t i = 0; i < m; ++i) {
    const Eigen::Vector2d q = robot_poses[i].position() - mean_p;
    const Eigen::Vector2d o =
        Eigen::Vector2d(formation.slots[i].l * std::cos(formation.slots[i].psi),
                        formation.slots[i].l * std::sin(formation.slots[i].psi)) -
        mean_o;
    s_dot += o.x() * q.x() + o.y() * q.y();
    s_cross += o.x() * q.y() - o.y() * q.x();
    spread += o.squaredNorm();
  }

  double theta;
  if (spread < 1e-18) {
    theta = robot_poses[0].theta;  // offsets carry no orientation signal
  } else {
    theta = std::atan2(s_cross, s_dot);
  }

  const double c = std::cos(theta), s = std::sin(theta);
  const Eigen::Vector2d pos = mean_p - Eigen::Vector2d(c * mean_o.x() - s * mean_o.y(),
                                                       s * mean_o.x() + c * mean_o.y());
  return Pose2(pos.x(), pos.y(), theta);
}

}  // namespace haul
