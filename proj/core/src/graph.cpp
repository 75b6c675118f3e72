#include "haul/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace haul {

Values::Values(int pose_first, int n_poses, int control_first, int n_controls)
    : pose_first_(pose_first),
      control_first_(control_first),
      poses_(n_poses),
      controls_(n_controls) {}

const Pose2& Values::pose(int n) const {
  const int i = n - pose_first_;
  if (i < 0 || i >= static_cast<int>(poses_.size())) {
    throw std::out_of_range("Values::pose: unknown variable");
  }
  return poses_[i];
}

Pose2& Values::pose(int n) {
  return const_cast<Pose2&>(static_cast<const Values*>(this)->pose(n));
}

const Control2& Values::control(int n) const {
  const int i = n - control_first_;
  if (i < 0 || i >= static_cast<int>(controls_.size())) {
    throw std::out_of_range("Values::control: unknown variable");
  }
  return controls_[i];
}

Control2& Values::control(int n) {
  return const_cast<Control2&>(static_cast<const Values*>(this)->control(n));
}

bool Values::has(VarKey k) const {
  if (k.type == VarType::Pose) {
    return k.index >= pose_first_ && k.index < pose_first_ + n_poses();
  }
  return k.index >= control_first_ && k.index < control_first_ + n_controls();
}

void FactorGraph::reserve(int n_vars, int n_factors) {
  vars_.reserve(n_vars);
  var_offsets_.reserve(n_vars);
  factors_.reserve(n_factors);
  factor_offsets_.reserve(n_factors);
}

int FactorGraph::resolve(VarKey key) const {
  const std::vector<int>& slots = key.type == VarType::Pose ? pose_slots_ : control_slots_;
  const int base = key.type == VarType::Pose ? pose_base_ : control_base_;
  const int i = key.index - base;
  if (slots.empty() || i < 0 || i >= static_cast<int>(slots.size())) return -1;
  return slots[i];
}

int FactorGraph::add_variable(VarKey key) {
  if (resolve(key) >= 0) {
    throw std::invalid_argument("FactorGraph::add_variable: duplicate variable");
  }
  std::vector<int>& slots = key.type == VarType::Pose ? pose_slots_ : control_slots_;
  int& base = key.type == VarType::Pose ? pose_base_ : control_base_;
  if (slots.empty()) {
    base = key.index;
    slots.push_back(-1);
  } else if (key.index < base) {
    slots.insert(slots.begin(), base - key.index, -1);
    base = key.index;
  } else if (key.index >= base + static_cast<int>(slots.size())) {
    slots.resize(key.index - base + 1, -1);
  }
  const int slot = static_cast<int>(vars_.size());
  slots[key.index - base] = slot;
  vars_.push_back(key);
  var_offsets_.push_back(total_dim_);
  const int offset = total_dim_;
  total_dim_ += var_dim(key.type);
  return offset;
}

int FactorGraph::offset_of(VarKey key) const {
  const int slot = resolve(key);
  if (slot < 0) {
    throw std::out_of_range("FactorGraph::offset_of: unregistered variable");
  }
  return var_offsets_[slot];
}

void FactorGraph::add_factor(Factor f) {
  std::array<int, 3> offsets{-1, -1, -1};
  int lo = total_dim_, hi = 0;
  for (int i = 0; i < f.arity; ++i) {
    const int slot = resolve(f.keys[i]);
    if (slot < 0) {
      throw std::invalid_argument("FactorGraph::add_factor: factor references unregistered variable");
    }
    offsets[i] = var_offsets_[slot];
    lo = std::min(lo, offsets[i]);
    hi = std::max(hi, offsets[i] + var_dim(f.keys[i].type) - 1);
  }
  semi_bandwidth_ = std::max(semi_bandwidth_, hi - lo);
  factors_.push_back(std::move(f));
  factor_offsets_.push_back(offsets);
}

Values FactorGraph::retract(const Values& v, const Eigen::VectorXd& delta) const {
  if (delta.size() != total_dim_) {
    throw std::invalid_argument("FactorGraph::retract: delta dimension mismatch");
  }
  Values out = v;
  for (size_t i = 0; i < vars_.size(); ++i) {
    const VarKey k = vars_[i];
    const int o = var_offsets_[i];
    if (k.type == VarType::Pose) {
      out.pose(k.index) = pose_boxplus(v.pose(k.index), delta.segment<3>(o));
    } else {
      Control2& u = out.control(k.index);
      u.v += delta[o];
      u.omega += delta[o + 1];
    }
  }
  return out;
}

double factor_error(const Factor& f, const Values& v) {
  switch (f.kind) {
    case FactorKind::PosePrior:
    case FactorKind::Anchor: {
      const Eigen::Vector3d raw = pose_boxminus(v.pose(f.keys[0].index), f.ref_pose);
      double e = 0.0;
      for (int i = 0; i < 3; ++i) {
        const double w = f.noise.inv_sigma(i) * raw[i];
        e += w * w;
      }
      return e;
    }
    case FactorKind::ControlPrior: {
      const Control2& u = v.control(f.keys[0].index);
      const double a = f.noise.inv_sigma(0) * (u.v - f.ref_control.v);
      const double b = f.noise.inv_sigma(1) * (u.omega - f.ref_control.omega);
      return a * a + b * b;
    }
    case FactorKind::Motion: {
      const Pose2& xn = v.pose(f.keys[0].index);
      const Control2& un = v.control(f.keys[1].index);
      const Pose2& xm = v.pose(f.keys[2].index);
      const double c = std::cos(xn.theta), s = std::sin(xn.theta);
      const double r0 = xn.x + f.Ts * un.v * c - xm.x;
      const double r1 = xn.y + f.Ts * un.v * s - xm.y;
      const double r2 = wrap_angle(xn.theta + f.Ts * un.omega - xm.theta);
      const double a = f.noise.inv_sigma(0) * r0;
      const double b = f.noise.inv_sigma(1) * r1;
      const double d = f.noise.inv_sigma(2) * r2;
      return a * a + b * b + d * d;
    }
    case FactorKind::Obstacle: {
      const Pose2& x = v.pose(f.keys[0].index);
      const double dx = x.x - f.center.x();
      const double dy = x.y - f.center.y();
      const double d2 = dx * dx + dy * dy;
      if (d2 >= f.radius * f.radius) return 0.0;
      const double e = f.noise.inv_sigma(0) * (1.0 - std::sqrt(d2) / f.radius);
      return e * e;
    }
  }
  return 0.0;
}

Residual evaluate_factor(const Factor& f, const Values& v) {
  switch (f.kind) {
    case FactorKind::PosePrior:
      return eval_pose_prior(f, v.pose(f.keys[0].index));
    case FactorKind::Anchor:
      return eval_anchor(f, v.pose(f.keys[0].index));
    case FactorKind::ControlPrior:
      return eval_control_prior(f, v.control(f.keys[0].index));
    case FactorKind::Motion:
      return eval_motion(f, v.pose(f.keys[0].index), v.control(f.keys[1].index),
                         v.pose(f.keys[2].index));
    case FactorKind::Obstacle:
      return eval_obstacle(f, v.pose(f.keys[0].index));
  }
  throw std::logic_error("evaluate_factor: unknown kind");
}

double total_error(const FactorGraph& g, const Values& v) {
  double e = 0.0;
  for (const Factor& f : g.factors()) {
    e += factor_error(f, v);
  }
  return e;
}

}  // namespace haul
