#include "haul/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace haul {

double wrap_angle(double a) {
  if (!std::isfinite(a)) {
    throw std::domain_error("wrap_angle: non-finite angle");
  }
  double r = std::fmod(a, 2.0 * M_PI);  // (-2pi, 2pi)
  if (r > M_PI) {
    r -= 2.0 * M_PI;
  } else if (r <= -M_PI) {
    r += 2.0 * M_PI;
  }
  return r;
}

Pose2::Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

Eigen::Vector3d pose_boxminus(const Pose2& a, const Pose2& b) {
  return {a.x - b.x, a.y - b.y, wrap_angle(a.theta - b.theta)};
}

Pose2 pose_boxplus(const Pose2& a, const Eigen::Vector3d& d) {
  return Pose2(a.x + d[0], a.y + d[1], a.theta + d[2]);
}

DiagNoise::DiagNoise(const Eigen::VectorXd& sigmas_sq) : dim_(static_cast<int>(sigmas_sq.size())) {
  if (dim_ < 1 || dim_ > 3) {
    throw std::invalid_argument("DiagNoise: dimension must be 1..3");
  }
  for (int i = 0; i < dim_; ++i) {
    const double s2 = sigmas_sq[i];
    if (!std::isfinite(s2) || s2 <= 0.0) {
      throw std::invalid_argument("DiagNoise: variances must be finite and > 0");
    }
    sigmas_sq_[i] = s2;
    inv_sigma_[i] = 1.0 / std::sqrt(s2);
  }
}

DiagNoise DiagNoise::from(std::initializer_list<double> sigmas_sq) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(sigmas_sq.size()));
  Eigen::Index i = 0;
  for (double s : sigmas_sq) v[i++] = s;
  return DiagNoise(v);
}

}  // namespace haul
