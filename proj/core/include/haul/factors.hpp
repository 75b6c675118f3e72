#pragma once

#include <array>
#include <cstdint>

#include "haul/geometry.hpp"
#include "haul/kinematics.hpp"

namespace haul {

enum class VarType : std::uint8_t { Pose, Control };

struct VarKey {
  VarType type = VarType::Pose;
  int index = 0;
  friend bool operator==(const VarKey&, const VarKey&) = default;
};

inline VarKey pose_key(int n) { return {VarType::Pose, n}; }
inline VarKey control_key(int n) { return {VarType::Control, n}; }
inline int var_dim(VarType t) { return t == VarType::Pose ? 3 : 2; }

enum class FactorKind : std::uint8_t { PosePrior, ControlPrior, Motion, Obstacle, Anchor };

// One cost term of the planning objective. A flat payload covers every kind;
// which fields are meaningful depends on `kind`.
struct Factor {
  FactorKind kind = FactorKind::PosePrior;
  std::array<VarKey, 3> keys{};
  int arity = 0;
  DiagNoise noise;

  Pose2 ref_pose;            // PosePrior, Anchor
  Control2 ref_control;      // ControlPrior
  double Ts = 0.0;           // Motion
  Eigen::Vector2d center{0.0, 0.0};  // Obstacle
  double radius = 0.0;               // Obstacle
};

Factor make_pose_prior(int n, const Pose2& ref, const DiagNoise& noise);
Factor make_control_prior(int n, const Control2& ref, const DiagNoise& noise);
// Ternary factor tying (x_n, u_n, x_{n+1}) through the centroid motion model.
Factor make_motion(int n, double Ts, const DiagNoise& noise);
// Hinge penalty active inside the safety bubble of radius R around `center`;
// attaches to the pose at step n. noise is 1-dimensional.
Factor make_obstacle(int n, const Eigen::Vector2d& center, double R, const DiagNoise& noise);
// Pose prior with variance 1e-12 per axis, pinning the current state.
Factor make_anchor(int n, const Pose2& ref);

// Whitened residual with one Jacobian block per connected variable. Fixed
// capacity (residual dim <= 3, up to 3 blocks of <= 3 columns); only the
// leading dims are meaningful.
struct Residual {
  Eigen::Vector3d value = Eigen::Vector3d::Zero();
  int dim = 0;
  int n_blocks = 0;
  std::array<Eigen::Matrix3d, 3> jac{};  // top-left dim x block_cols[i] used
  std::array<int, 3> block_cols{};

  double squared_norm() const { return value.head(dim).squaredNorm(); }
  Eigen::MatrixXd jacobian(int i) const { return jac[i].topLeftCorner(dim, block_cols[i]); }
};

Residual eval_pose_prior(const Factor& f, const Pose2& x);
Residual eval_control_prior(const Factor& f, const Control2& u);
Residual eval_motion(const Factor& f, const Pose2& x_n, const Control2& u_n, const Pose2& x_next);
// Residual (1 - d/R)/sigma inside the bubble, 0 outside; the heading column
// of the Jacobian is always zero, and the subgradient at d = R is taken as 0.
// A pose exactly on the obstacle center yields value whiten(1) with zero
// Jacobian (documented singularity).
Residual eval_obstacle(const Factor& f, const Pose2& x);
Residual eval_anchor(const Factor& f, const Pose2& x);

}  // namespace haul
