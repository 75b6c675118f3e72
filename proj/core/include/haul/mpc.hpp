#pragma once

#include <functional>

#include "haul/planner.hpp"

namespace haul {

// Tuning for the short-horizon MPC baselines. Both variants track the same
// reference and share the step interface of the factor-graph planner; they
// differ in how obstacles enter the problem (quadratic hinge penalty vs.
// hard constraints handled by an augmented Lagrangian).
struct MpcParams {
  int horizon = 2;
  double state_weight = 1.0;
  double terminal_weight = 1.0;
  double control_weight = 1.0;
  double motion_weight = 0.1;    // shooting-defect penalty (penalty variant)
  double obstacle_weight = 1.0;  // hinge penalty (penalty variant)
  double tol = 1e-2;  // gradient-norm stop; also the feasibility tolerance (constrained variant)
  int max_inner_iters = 200;
  int max_outer_iters = 25;  // augmented-Lagrangian updates (constrained variant)
  double rho_init = 1.0;     // initial constraint penalty (constrained variant)

  static MpcParams penalty_defaults();
  static MpcParams constrained_defaults();
};

enum class SolverKind { Ours, MpcP, MpcC };

// Central-difference gradient. Validation oracle for the analytic gradients
// the baselines run on, so it is exported rather than buried in test code.
Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double step = 1e-6);

// Penalty-formulation objective over the window starting at k, as a function
// of the stacked decision vector [u_k..u_{k+h-1}, x_{k+1}..x_{k+h}] with
// h = min(horizon, N - k). Exposed for term-level comparison in tests.
std::function<double(const Eigen::VectorXd&)> mpc_p_objective(const PlanProblem& p,
                                                              const MpcParams& mp, int k,
                                                              const Pose2& current);
// Analytic gradient of the same objective (what the solver descends on).
std::function<Eigen::VectorXd(const Eigen::VectorXd&)> mpc_p_gradient(const PlanProblem& p,
                                                                      const MpcParams& mp, int k,
                                                                      const Pose2& current);
// Matching initial decision vector: reference controls and poses.
Eigen::VectorXd mpc_p_initial(const PlanProblem& p, const MpcParams& mp, int k);

// One step of the penalty baseline: multiple shooting over h steps, all
// costs soft, minimized by BFGS with analytic gradients to a gradient-norm
// tolerance.
PlanStepResult mpc_p_step(const PlanProblem& p, const MpcParams& mp, int k, const Pose2& current,
                          bool allow_rotate = true);

// One step of the constrained baseline: single shooting over h steps,
// obstacle clearances as hard constraints via an augmented Lagrangian
// (multiplier update each outer pass; penalty grows tenfold when the worst
// violation stagnates), inner solves by BFGS with analytic gradients.
PlanStepResult mpc_c_step(const PlanProblem& p, const MpcParams& mp, int k, const Pose2& current,
                          bool allow_rotate = true);

// Adapts any of the three solvers to the mission loop.
Stepper make_stepper(SolverKind kind, const MpcParams& mp = MpcParams{});

}  // namespace haul
