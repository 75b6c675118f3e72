#include "haul/factors.hpp"

#include <cmath>
#include <stdexcept>

namespace haul {

namespace {

void check_kind(const Factor& f, FactorKind want, const char* op) {
  if (f.kind != want) {
    throw std::invalid_argument(std::string(op) + ": factor kind mismatch");
  }
}

}  // namespace

Factor make_pose_prior(int n, const Pose2& ref, const DiagNoise& noise) {
  if (noise.dim() != 3) throw std::invalid_argument("pose prior needs 3-dim noise");
  Factor f;
  f.kind = FactorKind::PosePrior;
  f.keys[0] = pose_key(n);
  f.arity = 1;
  f.noise = noise;
  f.ref_pose = ref;
  return f;
}

Factor make_control_prior(int n, const Control2& ref, const DiagNoise& noise) {
  if (noise.dim() != 2) throw std::invalid_argument("control prior needs 2-dim noise");
  Factor f;
  f.kind = FactorKind::ControlPrior;
  f.keys[0] = control_key(n);
  f.arity = 1;
  f.noise = noise;
  f.ref_control = ref;
  return f;
}

Factor make_motion(int n, double Ts, const DiagNoise& noise) {
  if (noise.dim() != 3) throw std::invalid_argument("motion factor needs 3-dim noise");
  if (!(Ts > 0.0)) throw std::domain_error("motion factor needs Ts > 0");
  Factor f;
  f.kind = FactorKind::Motion;
  f.keys = {pose_key(n), control_key(n), pose_key(n + 1)};
  f.arity = 3;
  f.noise = noise;
  f.Ts = Ts;
  return f;
}

Factor make_obstacle(int n, const Eigen::Vector2d& center, double R, const DiagNoise& noise) {
  if (noise.dim() != 1) throw std::invalid_argument("obstacle factor needs 1-dim noise");
  if (!(R > 0.0)) throw std::domain_error("obstacle factor needs R > 0");
  Factor f;
  f.kind = FactorKind::Obstacle;
  f.keys[0] = pose_key(n);
  f.arity = 1;
  f.noise = noise;
  f.center = center;
  f.radius = R;
  return f;
}

Factor make_anchor(int n, const Pose2& ref) {
  Factor f;
  f.kind = FactorKind::Anchor;
  f.keys[0] = pose_key(n);
  f.arity = 1;
  f.noise = DiagNoise::from({1e-12, 1e-12, 1e-12});
  f.ref_pose = ref;
  return f;
}

namespace {

// Shared by pose priors and anchors: whitened boxminus from the reference
// with an identity Jacobian (up to the angle-wrap cut).
Residual pose_prior_residual(const Factor& f, const Pose2& x) {
  Residual r;
  r.dim = 3;
  r.n_blocks = 1;
  r.block_cols[0] = 3;
  const Eigen::Vector3d raw = pose_boxminus(x, f.ref_pose);
  r.jac[0].setZero();
  for (int i = 0; i < 3; ++i) {
    const double w = f.noise.inv_sigma(i);
    r.value[i] = w * raw[i];
    r.jac[0](i, i) = w;
  }
  return r;
}

}  // namespace

Residual eval_pose_prior(const Factor& f, const Pose2& x) {
  check_kind(f, FactorKind::PosePrior, "eval_pose_prior");
  return pose_prior_residual(f, x);
}

Residual eval_anchor(const Factor& f, const Pose2& x) {
  check_kind(f, FactorKind::Anchor, "eval_anchor");
  return pose_prior_residual(f, x);
}

Residual eval_control_prior(const Factor& f, const Control2& u) {
  check_kind(f, FactorKind::ControlPrior, "eval_control_prior");
  Residual r;
  r.dim = 2;
  r.n_blocks = 1;
  r.block_cols[0] = 2;
  r.jac[0].setZero();
  const double w0 = f.noise.inv_sigma(0);
  const double w1 = f.noise.inv_sigma(1);
  r.value[0] = w0 * (u.v - f.ref_control.v);
  r.value[1] = w1 * (u.omega - f.ref_control.omega);
  r.jac[0](0, 0) = w0;
  r.jac[0](1, 1) = w1;
  return r;
}

Residual eval_motion(const Factor& f, const Pose2& x_n, const Control2& u_n, const Pose2& x_next) {
  check_kind(f, FactorKind::Motion, "eval_motion");
  Residual r;
  r.dim = 3;
  r.n_blocks = 3;
  r.block_cols = {3, 2, 3};

  const double c = std::cos(x_n.theta);
  const double s = std::sin(x_n.theta);
  const double Ts = f.Ts;

  const Pose2 pred(x_n.x + Ts * u_n.v * c, x_n.y + Ts * u_n.v * s, x_n.theta + Ts * u_n.omega);
  const Eigen::Vector3d raw = pose_boxminus(pred, x_next);

  Eigen::Matrix3d& jx = r.jac[0];
  Eigen::Matrix3d& ju = r.jac[1];
  Eigen::Matrix3d& jn = r.jac[2];
  jx.setZero();
  ju.setZero();
  jn.setZero();

  for (int i = 0; i < 3; ++i) {
    const double w = f.noise.inv_sigma(i);
    r.value[i] = w * raw[i];
    jx(i, i) = w;      // d(raw_i)/d(x_n_i) = 1 on the diagonal
    jn(i, i) = -w;     // d(raw)/d(x_next) = -I
  }
  const double w0 = f.noise.inv_sigma(0);
  const double w1 = f.noise.inv_sigma(1);
  const double w2 = f.noise.inv_sigma(2);
  jx(0, 2) = w0 * (-Ts * u_n.v * s);
  jx(1, 2) = w1 * (Ts * u_n.v * c);
  ju(0, 0) = w0 * (Ts * c);
  ju(1, 0) = w1 * (Ts * s);
  ju(2, 1) = w2 * Ts;
  return r;
}

Residual eval_obstacle(const Factor& f, const Pose2& x) {
  check_kind(f, FactorKind::Obstacle, "eval_obstacle");
  Residual r;
  r.dim = 1;
  r.n_blocks = 1;
  r.block_cols[0] = 3;
  r.jac[0].setZero();
  r.value[0] = 0.0;

  const double dx = x.x - f.center.x();
  const double dy = x.y - f.center.y();
  const double d2 = dx * dx + dy * dy;
  const double R = f.radius;
  if (d2 >= R * R) {
    return r;  // outside the bubble: zero residual, zero gradient
  }
  const double w = f.noise.inv_sigma(0);
  const double d = std::sqrt(d2);
  if (d == 0.0) {
    r.value[0] = w;  // on the center: maximal penalty, direction undefined
    return r;
  }
  r.value[0] = w * (1.0 - d / R);
  const double scale = -w / (R * d);
  r.jac[0](0, 0) = scale * dx;
  r.jac[0](0, 1) = scale * dy;
  return r;
}

}  // namespace haul
