#pragma once

#include <vector>

#include "haul/factors.hpp"

namespace haul {

// Assignment of values to a contiguous range of pose and control variables.
// Graphs built over steps k..N index directly into these ranges.
class Values {
 public:
  Values() = default;
  Values(int pose_first, int n_poses, int control_first, int n_controls);

  const Pose2& pose(int n) const;
  Pose2& pose(int n);
  const Control2& control(int n) const;
  Control2& control(int n);
  bool has(VarKey k) const;

  int pose_first() const { return pose_first_; }
  int n_poses() const { return static_cast<int>(poses_.size()); }
  int control_first() const { return control_first_; }
  int n_controls() const { return static_cast<int>(controls_.size()); }

 private:
  int pose_first_ = 0;
  int control_first_ = 0;
  std::vector<Pose2> poses_;
  std::vector<Control2> controls_;
};

// Ordered collection of variables (defining the column layout of the linear
// system) and factors over them. Variables must be registered before any
// factor referencing them is added; registration order fixes column order, so
// interleaving x_k, u_k, x_{k+1}, ... keeps the normal equations banded.
class FactorGraph {
 public:
  void reserve(int n_vars, int n_factors);
  // Returns the column offset assigned to the variable.
  int add_variable(VarKey key);
  void add_factor(Factor f);

  int num_variables() const { return static_cast<int>(vars_.size()); }
  int num_factors() const { return static_cast<int>(factors_.size()); }
  int total_dim() const { return total_dim_; }
  // Max column span of any factor minus one; the semi-bandwidth of H.
  int semi_bandwidth() const { return semi_bandwidth_; }

  const std::vector<Factor>& factors() const { return factors_; }
  const std::array<int, 3>& factor_offsets(int i) const { return factor_offsets_[i]; }
  int offset_of(VarKey key) const;
  VarKey variable(int i) const { return vars_[i]; }

  // Applies a stacked update in column order: poses via boxplus, controls by
  // addition.
  Values retract(const Values& v, const Eigen::VectorXd& delta) const;

 private:
  int resolve(VarKey key) const;  // -1 when unregistered

  std::vector<VarKey> vars_;
  std::vector<int> var_offsets_;
  std::vector<Factor> factors_;
  std::vector<std::array<int, 3>> factor_offsets_;
  // index -> registration slot, per variable type, offset by the smallest
  // registered index (planning graphs use contiguous step indices)
  std::vector<int> pose_slots_, control_slots_;
  int pose_base_ = 0, control_base_ = 0;
  int total_dim_ = 0;
  int semi_bandwidth_ = 0;
};

// Squared whitened residual without Jacobian work; the cheap path used by the
// solver's error evaluations.
double factor_error(const Factor& f, const Values& v);

// Full residual with Jacobian blocks.
Residual evaluate_factor(const Factor& f, const Values& v);

// Sum of squared whitened residuals over all factors: the planning cost.
double total_error(const FactorGraph& g, const Values& v);

}  // namespace haul
