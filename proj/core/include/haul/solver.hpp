#pragma once

#include <stdexcept>
#include <string>

#include "haul/graph.hpp"

namespace haul {

// Symmetric matrix in lower-band storage: entry (i, j) with i >= j and
// i - j <= semi_bandwidth lives at band(i - j, j). A semi-bandwidth of
// dim - 1 degenerates to a dense lower triangle, so small or unstructured
// systems are handled by the same code path.
class BandMatrix {
 public:
  BandMatrix() = default;
  BandMatrix(int dim, int semi_bandwidth);

  int dim() const { return dim_; }
  int semi_bandwidth() const { return bw_; }

  double& at(int i, int j) { return band_(i - j, j); }
  double at(int i, int j) const { return band_(i - j, j); }

  void set_zero() { band_.setZero(); }
  Eigen::MatrixXd to_dense() const;
  Eigen::VectorXd diagonal() const;
  // y = A x using the symmetric completion of the stored lower band.
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;

  // In-place lower Cholesky; returns false if a pivot is not strictly
  // positive (matrix not positive definite).
  bool cholesky_in_place();
  // Solves A x = b given a completed cholesky_in_place.
  void cholesky_solve(Eigen::VectorXd& b) const;

 private:
  int dim_ = 0;
  int bw_ = 0;
  Eigen::MatrixXd band_;  // (bw+1) x dim
};

// Gauss-Newton normal equations of a graph at a linearization point:
// H = J^T J and g = -J^T r for the stacked whitened residual r.
struct NormalSystem {
  BandMatrix H;
  Eigen::VectorXd g;
  double error = 0.0;  // total squared whitened residual at the point
};

struct LMParams {
  double rel_tol = 1e-2;
  double abs_tol = 1e-2;
  double err_tol = 1e-2;
  double lambda_init = 1e-4;
  double lambda_factor = 10.0;
  int max_iters = 100;
  double lambda_max = 1e10;
};

enum class ConvergedBy { rel, abs, err, max_iters };

struct SolveStats {
  int iterations = 0;
  double initial_error = 0.0;
  double final_error = 0.0;
  double wall_time = 0.0;  // seconds
  ConvergedBy converged_by = ConvergedBy::max_iters;
};

class IndefiniteSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when no step decreases the error before lambda exceeds lambda_max;
// carries the best values seen so the caller can degrade gracefully.
class SolverDivergedError : public std::runtime_error {
 public:
  SolverDivergedError(std::string what, Values best, SolveStats stats)
      : std::runtime_error(std::move(what)), best_values(std::move(best)), stats(stats) {}
  Values best_values;
  SolveStats stats;
};

// Assembles H = J^T J (banded by the graph's column layout) and g = -J^T r.
// Throws std::runtime_error naming the offending factor on non-finite
// residuals.
NormalSystem linearize(const FactorGraph& g, const Values& v);

// Solves (H + lambda*diag(H)) delta = g by banded Cholesky with one pass of
// iterative refinement; requires the damped system to be positive definite
// and the solve residual to reach 1e-10 * ||g||, else throws
// IndefiniteSystemError.
Eigen::VectorXd solve_normal(const NormalSystem& system, double lambda);

// Levenberg-Marquardt with multiplicative diag(H) damping. Accepts a step
// when the error does not increase (lambda /= factor), rejects otherwise
// (lambda *= factor). Stops on: total error < err_tol, relative decrease
// < rel_tol, absolute decrease < abs_tol, or max_iters. Returns best-so-far
// values; final_error <= initial_error always.
std::pair<Values, SolveStats> lm_optimize(const FactorGraph& g, const Values& init,
                                          const LMParams& p);

}  // namespace haul
