#pragma once

#include <Eigen/Core>

namespace haul {

// Normalizes an angle into (-pi, pi]. Throws std::domain_error on non-finite input.
double wrap_angle(double a);

// Planar pose. theta is wrapped into (-pi, pi] on construction, so downstream
// code never sees an unnormalized heading.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_);

  Eigen::Vector2d position() const { return {x, y}; }
};

// Unicycle control: linear speed and angular rate.
struct Control2 {
  double v = 0.0;
  double omega = 0.0;
};

// World-frame centroid velocity.
struct CentroidVel {
  double xdot = 0.0;
  double ydot = 0.0;
  double thetadot = 0.0;
};

// Componentwise pose difference with the heading wrapped; the residual
// subtraction used by the prior and motion factors.
Eigen::Vector3d pose_boxminus(const Pose2& a, const Pose2& b);

// Retraction used by the optimizer's update step: componentwise addition with
// heading wrap. boxminus(boxplus(a, d), a) == d whenever |d[2]| < pi.
Pose2 pose_boxplus(const Pose2& a, const Eigen::Vector3d& d);

// Diagonal noise model storing per-dimension variances (dim 1..3).
// Zero or negative variance is rejected at construction; near-hard
// constraints use a tiny variance (1e-12) instead of zero.
class DiagNoise {
 public:
  DiagNoise() = default;
  explicit DiagNoise(const Eigen::VectorXd& sigmas_sq);
  static DiagNoise from(std::initializer_list<double> sigmas_sq);

  int dim() const { return dim_; }
  double variance(int i) const { return sigmas_sq_[i]; }
  // 1/sigma for dimension i; multiplying a residual row by it makes the
  // squared norm a Mahalanobis distance.
  double inv_sigma(int i) const { return inv_sigma_[i]; }

 private:
  int dim_ = 0;
  Eigen::Vector3d sigmas_sq_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d inv_sigma_ = Eigen::Vector3d::Zero();
};

}  // namespace haul
