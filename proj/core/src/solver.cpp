#include "haul/solver.hpp"

#include <chrono>
#include <cmath>

namespace haul {

BandMatrix::BandMatrix(int dim, int semi_bandwidth)
    : dim_(dim), bw_(std::min(semi_bandwidth, dim > 0 ? dim - 1 : 0)) {
  band_ = Eigen::MatrixXd::Zero(bw_ + 1, dim_);
}

Eigen::MatrixXd BandMatrix::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim_, dim_);
  for (int j = 0; j < dim_; ++j) {
    for (int i = j; i <= std::min(dim_ - 1, j + bw_); ++i) {
      m(i, j) = at(i, j);
      m(j, i) = at(i, j);
    }
  }
  return m;
}

Eigen::VectorXd BandMatrix::diagonal() const {
  return band_.row(0).transpose();
}

Eigen::VectorXd BandMatrix::multiply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(dim_);
  for (int j = 0; j < dim_; ++j) {
    y[j] += band_(0, j) * x[j];
    const int top = std::min(dim_ - 1, j + bw_);
    for (int i = j + 1; i <= top; ++i) {
      const double a = band_(i - j, j);
      y[i] += a * x[j];
      y[j] += a * x[i];
    }
  }
  return y;
}

bool BandMatrix::cholesky_in_place() {
  for (int j = 0; j < dim_; ++j) {
    double d = band_(0, j);
    const int klo = std::max(0, j - bw_);
    for (int k = klo; k < j; ++k) {
      const double l = band_(j - k, k);
      d -= l * l;
    }
    if (!(d > 0.0) || !std::isfinite(d)) {
      return false;
    }
    const double ljj = std::sqrt(d);
    band_(0, j) = ljj;
    const int itop = std::min(dim_ - 1, j + bw_);
    for (int i = j + 1; i <= itop; ++i) {
      double v = band_(i - j, j);
      const int kl = std::max(0, i - bw_);
      for (int k = kl; k < j; ++k) {
        v -= band_(i - k, k) * band_(j - k, k);
      }
      band_(i - j, j) = v / ljj;
    }
  }
  return true;
}

void BandMatrix::cholesky_solve(Eigen::VectorXd& b) const {
  // forward: L y = b
  for (int j = 0; j < dim_; ++j) {
    const int klo = std::max(0, j - bw_);
    double v = b[j];
    for (int k = klo; k < j; ++k) {
      v -= band_(j - k, k) * b[k];
    }
    b[j] = v / band_(0, j);
  }
  // backward: L^T x = y
  for (int j = dim_ - 1; j >= 0; --j) {
    const int itop = std::min(dim_ - 1, j + bw_);
    double v = b[j];
    for (int i = j + 1; i <= itop; ++i) {
      v -= band_(i - j, j) * b[i];
    }
    b[j] = v / band_(0, j);
  }
}

NormalSystem linearize(const FactorGraph& g, const Values& v) {
  NormalSystem sys;
  const int n = g.total_dim();
  sys.H = BandMatrix(n, g.semi_bandwidth());
  sys.g = Eigen::VectorXd::Zero(n);
  sys.error = 0.0;

  const std::vector<Factor>& factors = g.factors();
  for (int fi = 0; fi < static_cast<int>(factors.size()); ++fi) {
    const Factor& f = factors[fi];
    // Inactive hinges contribute nothing; skip them before building a residual.
    if (f.kind == FactorKind::Obstacle && factor_error(f, v) == 0.0) {
      continue;
    }
    const Residual r = evaluate_factor(f, v);
    const double e = r.squared_norm();
    if (!std::isfinite(e)) {
      throw std::runtime_error("linearize: non-finite residual at factor " + std::to_string(fi));
    }
    sys.error += e;

    using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;
    const std::array<int, 3>& off = g.factor_offsets(fi);
    for (int a = 0; a < r.n_blocks; ++a) {
      const int oa = off[a];
      const int da = r.block_cols[a];
      const auto Ja = r.jac[a].topLeftCorner(r.dim, da);
      sys.g.segment(oa, da).noalias() -= Ja.transpose() * r.value.head(r.dim);
      for (int b = 0; b <= a; ++b) {
        const int ob = off[b];
        const int db = r.block_cols[b];
        const auto Jb = r.jac[b].topLeftCorner(r.dim, db);
        // accumulate into the lower triangle only
        if (oa == ob) {
          const SmallMat blk = Ja.transpose() * Jb;
          for (int cj = 0; cj < db; ++cj) {
            for (int ci = cj; ci < da; ++ci) {
              sys.H.at(oa + ci, ob + cj) += blk(ci, cj);
            }
          }
        } else {
          const int lo = std::min(oa, ob);
          const int hi = std::max(oa, ob);
          const SmallMat blk = oa > ob ? SmallMat(Ja.transpose() * Jb)
                                       : SmallMat(Jb.transpose() * Ja);
          const int rows = oa > ob ? da : db;
          const int cols = oa > ob ? db : da;
          for (int cj = 0; cj < cols; ++cj) {
            for (int ci = 0; ci < rows; ++ci) {
              sys.H.at(hi + ci, lo + cj) += blk(ci, cj);
            }
          }
        }
      }
    }
  }
  return sys;
}

Eigen::VectorXd solve_normal(const NormalSystem& system, double lambda) {
  if (!(lambda >= 0.0)) {
    throw std::invalid_argument("solve_normal: lambda must be >= 0");
  }
  const int n = system.H.dim();
  const Eigen::VectorXd damp = lambda * system.H.diagonal();
  BandMatrix chol = system.H;
  for (int j = 0; j < n; ++j) {
    chol.at(j, j) += damp[j];
  }
  if (!chol.cholesky_in_place()) {
    throw IndefiniteSystemError("solve_normal: damped system not positive definite");
  }
  Eigen::VectorXd delta = system.g;
  chol.cholesky_solve(delta);

  const auto damped_mul = [&](const Eigen::VectorXd& x) {
    return (system.H.multiply(x) + damp.cwiseProduct(x)).eval();
  };
  const double gnorm = system.g.norm();
  for (int pass = 0; pass < 3; ++pass) {
    Eigen::VectorXd resid = system.g - damped_mul(delta);
    if (resid.norm() <= 1e-10 * gnorm || gnorm == 0.0) {
      return delta;
    }
    chol.cholesky_solve(resid);
    delta += resid;
  }
  if ((system.g - damped_mul(delta)).norm() > 1e-10 * gnorm) {
    throw IndefiniteSystemError("solve_normal: iterative refinement failed to converge");
  }
  return delta;
}

std::pair<Values, SolveStats> lm_optimize(const FactorGraph& g, const Values& init,
                                          const LMParams& p) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&t0]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  SolveStats stats;
  Values values = init;
  double error = total_error(g, values);
  stats.initial_error = error;
  stats.final_error = error;

  if (error < p.err_tol) {
    stats.converged_by = ConvergedBy::err;
    stats.wall_time = elapsed();
    return {values, stats};
  }

  double lambda = p.lambda_init;
  for (int iter = 1; iter <= p.max_iters; ++iter) {
    const NormalSystem sys = linearize(g, values);
    bool accepted = false;
    Values candidate;
    double cand_error = 0.0;
    while (lambda <= p.lambda_max) {
      Eigen::VectorXd delta;
      try {
        delta = solve_normal(sys, lambda);
      } catch (const IndefiniteSystemError&) {
        lambda *= p.lambda_factor;
        continue;
      }
      candidate = g.retract(values, delta);
      cand_error = total_error(g, candidate);
      if (std::isfinite(cand_error) && cand_error <= error) {
        accepted = true;
        lambda = std::max(lambda / p.lambda_factor, 1e-12);
        break;
      }
      lambda *= p.lambda_factor;
    }
    if (!accepted) {
      stats.iterations = iter;
      stats.final_error = error;
      stats.wall_time = elapsed();
      throw SolverDivergedError("lm_optimize: no acceptable step before lambda_max", values,
                                stats);
    }

    const double decrease = error - cand_error;
    const double rel = decrease / error;
    values = std::move(candidate);
    error = cand_error;
    stats.iterations = iter;
    stats.final_error = error;

    if (error < p.err_tol) {
      stats.converged_by = ConvergedBy::err;
      stats.wall_time = elapsed();
      return {values, stats};
    }
    if (rel < p.rel_tol) {
      stats.converged_by = ConvergedBy::rel;
      stats.wall_time = elapsed();
      return {values, stats};
    }
    if (decrease < p.abs_tol) {
      stats.converged_by = ConvergedBy::abs;
      stats.wall_time = elapsed();
      return {values, stats};
    }
  }
  stats.converged_by = ConvergedBy::max_iters;
  stats.wall_time = elapsed();
  return {values, stats};
}

}  // namespace haul
