#include "haul/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace haul {

MpcParams MpcParams::penalty_defaults() {
  MpcParams mp;
  mp.horizon = 2;
  mp.state_weight = 1.0;
  mp.terminal_weight = 1.0;
  mp.control_weight = 1.0;
  mp.motion_weight = 1e-1;
  mp.obstacle_weight = 1.0;
  mp.tol = 1e-2;
  return mp;
}

MpcParams MpcParams::constrained_defaults() {
  MpcParams mp;
  mp.horizon = 2;
  mp.state_weight = 1.0;
  mp.terminal_weight = 1e3;
  mp.control_weight = 1e-3;
  mp.tol = 1e-4;
  return mp;
}

Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    xp[i] = xi + step;
    const double fp = f(xp);
    xp[i] = xi - step;
    const double fm = f(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Window {
  const PlanProblem* p = nullptr;
  const MpcParams* mp = nullptr;
  int k = 0;
  int h = 0;
  Pose2 current;
};

Window make_window(const PlanProblem& p, const MpcParams& mp, int k, const Pose2& current) {
  if (mp.horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  const int N = p.reference.steps();
  if (k < 0 || k >= N) throw std::out_of_range("window start outside the reference path");
  Window w;
  w.p = &p;
  w.mp = &mp;
  w.k = k;
  w.h = std::min(mp.horizon, N - k);
  w.current = current;
  return w;
}

Pose2 pose_at(const Eigen::VectorXd& z, int h, int i) {
  const int off = 2 * h + 3 * (i - 1);
  return Pose2(z[off], z[off + 1], z[off + 2]);
}

Control2 control_at(const Eigen::VectorXd& z, int i) { return {z[2 * i], z[2 * i + 1]}; }

// Euler-step jacobians of the centroid model: A = d(next)/d(state),
// B = d(next)/d(control).
void centroid_step_jacobians(const Pose2& x, const Control2& u, double Ts, Eigen::Matrix3d& A,
                             Eigen::Matrix<double, 3, 2>& B) {
  const double c = std::cos(x.theta);
  const double s = std::sin(x.theta);
  A.setIdentity();
  A(0, 2) = -Ts * u.v * s;
  A(1, 2) = Ts * u.v * c;
  B.setZero();
  B(0, 0) = Ts * c;
  B(1, 0) = Ts * s;
  B(2, 1) = Ts;
}

// Scaled clearance shortfall max(0, 1 - d/R); when active and dpos is given,
// also its gradient with respect to the position.
double hinge(const Eigen::Vector2d& pos, const Eigen::Vector2d& center, double R,
             Eigen::Vector2d* dpos = nullptr) {
  const Eigen::Vector2d diff = pos - center;
  const double d = diff.norm();
  if (d >= R) return 0.0;
  if (dpos) {
    if (d > 1e-12)
      *dpos = -diff / (R * d);
    else
      dpos->setZero();  // dead centre: flat spot, no descent direction
  }
  return 1.0 - d / R;
}

// Penalty objective over the multiple-shooting vector z
// [u_k..u_{k+h-1}, x_{k+1}..x_{k+h}]; fills the analytic gradient when g is
// given.
double mpc_p_value(const Window& w, const Eigen::VectorXd& z, Eigen::VectorXd* g = nullptr) {
  if (!z.allFinite()) return kInf;
  const PlanProblem& p = *w.p;
  const MpcParams& mp = *w.mp;
  const ReferencePath& ref = p.reference;
  if (g) g->setZero(z.size());
  const auto xoff = [&](int i) { return 2 * w.h + 3 * (i - 1); };
  double E = 0.0;
  for (int i = 1; i <= w.h; ++i) {
    const Pose2 x = pose_at(z, w.h, i);
    const double wn = (i == w.h) ? mp.terminal_weight : mp.state_weight;
    const Eigen::Vector3d r = pose_boxminus(x, ref.poses[w.k + i]);
    E += wn * r.squaredNorm();
    if (g) g->segment<3>(xoff(i)) += 2.0 * wn * r;
    for (const ObstaclePoint& ob : p.obstacles) {
      Eigen::Vector2d dphi;
      const double phi = hinge(x.position(), ob.center, p.safety_radius, g ? &dphi : nullptr);
      if (phi > 0.0) {
        E += mp.obstacle_weight * phi * phi;
        if (g) g->segment<2>(xoff(i)) += 2.0 * mp.obstacle_weight * phi * dphi;
      }
    }
  }
  for (int i = 0; i < w.h; ++i) {
    const Control2 u = control_at(z, i);
    const Control2& ur = ref.controls[w.k + i];
    E += mp.control_weight * ((u.v - ur.v) * (u.v - ur.v) +
                              (u.omega - ur.omega) * (u.omega - ur.omega));
    if (g) {
      (*g)[2 * i] += 2.0 * mp.control_weight * (u.v - ur.v);
      (*g)[2 * i + 1] += 2.0 * mp.control_weight * (u.omega - ur.omega);
    }
    const Pose2 prev = (i == 0) ? w.current : pose_at(z, w.h, i);
    const Pose2 pred = propagate_centroid(prev, u, ref.Ts);
    const Eigen::Vector3d r = pose_boxminus(pose_at(z, w.h, i + 1), pred);
    E += mp.motion_weight * r.squaredNorm();
    if (g) {
      Eigen::Matrix3d A;
      Eigen::Matrix<double, 3, 2> B;
      centroid_step_jacobians(prev, u, ref.Ts, A, B);
      g->segment<3>(xoff(i + 1)) += 2.0 * mp.motion_weight * r;
      g->segment<2>(2 * i) -= 2.0 * mp.motion_weight * (B.transpose() * r);
      if (i > 0) g->segment<3>(xoff(i)) -= 2.0 * mp.motion_weight * (A.transpose() * r);
    }
  }
  return E;
}

struct BfgsOutcome {
  Eigen::VectorXd z;
  double f = 0.0;
  int iters = 0;
  bool linesearch_failed = false;
  ConvergedBy by = ConvergedBy::max_iters;
};

// Objective with analytic gradient: returns the value, fills g.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Quasi-Newton descent (inverse BFGS update, Armijo backtracking). Converges
// when the max-norm of the gradient is at or below tol; a search direction
// with no possible decrease stops early, and an exhausted backtracking line
// search returns best-so-far with the failure flagged.
BfgsOutcome bfgs_minimize(const Objective& fg, Eigen::VectorXd z, double tol, int max_iters) {
  const Eigen::Index n = z.size();
  BfgsOutcome out;
  Eigen::VectorXd g(n);
  double fz = fg(z, g);
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd gnew(n);
  int it = 0;
  while (it < max_iters && g.lpNorm<Eigen::Infinity>() > tol) {
    Eigen::VectorXd d = -(Hinv * g);
    double gd = g.dot(d);
    if (!(gd < 0.0) || !d.allFinite()) {
      Hinv.setIdentity();
      d = -g;
      gd = -g.squaredNorm();
      if (gd == 0.0) {  // stationary but above tol in another component scale
        out.by = ConvergedBy::rel;
        break;
      }
    }
    double t = 1.0;
    double fnew = kInf;
    Eigen::VectorXd znew;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      znew = z + t * d;
      fnew = fg(znew, gnew);
      if (fnew <= fz + 1e-4 * t * gd) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      out.linesearch_failed = true;
      break;
    }
    ++it;
    const Eigen::VectorXd s = znew - z;
    const Eigen::VectorXd y = gnew - g;
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
      Hinv = A * Hinv * A.transpose() + rho * s * s.transpose();
    }
    z = std::move(znew);
    fz = fnew;
    g = gnew;
  }
  if (!out.linesearch_failed && out.by == ConvergedBy::max_iters &&
      g.lpNorm<Eigen::Infinity>() <= tol)
    out.by = ConvergedBy::err;
  out.z = std::move(z);
  out.f = fz;
  out.iters = it;
  return out;
}

}  // namespace

std::function<double(const Eigen::VectorXd&)> mpc_p_objective(const PlanProblem& p,
                                                              const MpcParams& mp, int k,
                                                              const Pose2& current) {
  // The callable keeps pointers into p and mp; both must outlive it.
  const Window w = make_window(p, mp, k, current);
  return [w](const Eigen::VectorXd& z) { return mpc_p_value(w, z); };
}

std::function<Eigen::VectorXd(const Eigen::VectorXd&)> mpc_p_gradient(const PlanProblem& p,
                                                                      const MpcParams& mp, int k,
                                                                      const Pose2& current) {
  const Window w = make_window(p, mp, k, current);
  return [w](const Eigen::VectorXd& z) {
    Eigen::VectorXd g(z.size());
    mpc_p_value(w, z, &g);
    return g;
  };
}

Eigen::VectorXd mpc_p_initial(const PlanProblem& p, const MpcParams& mp, int k) {
  const Window w = make_window(p, mp, k, Pose2());
  const ReferencePath& ref = p.reference;
  Eigen::VectorXd z(5 * w.h);
  for (int i = 0; i < w.h; ++i) {
    z[2 * i] = ref.controls[k + i].v;
    z[2 * i + 1] = ref.controls[k + i].omega;
  }
  for (int i = 1; i <= w.h; ++i) {
    const Pose2& x = ref.poses[k + i];
    const int off = 2 * w.h + 3 * (i - 1);
    z[off] = x.x;
    z[off + 1] = x.y;
    z[off + 2] = x.theta;
  }
  return z;
}

PlanStepResult mpc_p_step(const PlanProblem& p, const MpcParams& mp, int k, const Pose2& current,
                          bool allow_rotate) {
  const auto t0 = std::chrono::steady_clock::now();
  const Window w = make_window(p, mp, k, current);
  const Objective obj = [&w](const Eigen::VectorXd& z, Eigen::VectorXd& g) {
    return mpc_p_value(w, z, &g);
  };
  const Eigen::VectorXd z0 = mpc_p_initial(p, mp, k);
  const double f0 = mpc_p_value(w, z0);
  BfgsOutcome r = bfgs_minimize(obj, z0, mp.tol, mp.max_inner_iters);

  PlanStepResult out;
  out.stats.iterations = r.iters;
  out.stats.initial_error = f0;
  out.stats.final_error = r.f;
  out.stats.converged_by = r.by;
  out.linesearch_failed = r.linesearch_failed;
  out.predicted.reserve(w.h);
  for (int i = 1; i <= w.h; ++i) out.predicted.push_back(pose_at(r.z, w.h, i));
  finish_step(p, w.k, current, allow_rotate, control_at(r.z, 0), out);
  out.stats.wall_time = seconds_since(t0);
  return out;
}

namespace {

// Single-shooting rollout: xs[0] = current, xs[i] after i controls.
std::vector<Pose2> roll_window(const Window& w, const Eigen::VectorXd& z) {
  std::vector<Pose2> xs(w.h + 1);
  xs[0] = w.current;
  for (int i = 0; i < w.h; ++i)
    xs[i + 1] = propagate_centroid(xs[i], control_at(z, i), w.p->reference.Ts);
  return xs;
}

double mpc_c_tracking(const Window& w, const std::vector<Pose2>& xs, const Eigen::VectorXd& z) {
  const PlanProblem& p = *w.p;
  const MpcParams& mp = *w.mp;
  double E = 0.0;
  for (int i = 1; i <= w.h; ++i) {
    const double wn = (i == w.h) ? mp.terminal_weight : mp.state_weight;
    E += wn * pose_boxminus(xs[i], p.reference.poses[w.k + i]).squaredNorm();
  }
  for (int i = 0; i < w.h; ++i) {
    const Control2 u = control_at(z, i);
    const Control2& ur = p.reference.controls[w.k + i];
    E += mp.control_weight * ((u.v - ur.v) * (u.v - ur.v) +
                              (u.omega - ur.omega) * (u.omega - ur.omega));
  }
  return E;
}

// Clearance constraints c = R - d <= 0, stacked stage-major then obstacle.
Eigen::VectorXd mpc_c_constraints(const Window& w, const std::vector<Pose2>& xs) {
  const PlanProblem& p = *w.p;
  const int J = static_cast<int>(p.obstacles.size());
  Eigen::VectorXd c(w.h * J);
  for (int i = 1; i <= w.h; ++i)
    for (int j = 0; j < J; ++j)
      c[(i - 1) * J + j] =
          p.safety_radius - (xs[i].position() - p.obstacles[j].center).norm();
  return c;
}

// Augmented Lagrangian of the single-shooting problem over the control
// vector z. The state sensitivities d(xs[i])/dz accumulate forward through
// the model jacobians, so the gradient (filled when g is given) is analytic.
double mpc_c_al_value(const Window& w, const Eigen::VectorXd& z, const Eigen::VectorXd& lambda,
                      double rho, Eigen::VectorXd* g = nullptr) {
  if (!z.allFinite()) return kInf;
  const PlanProblem& p = *w.p;
  const MpcParams& mp = *w.mp;
  const double Ts = p.reference.Ts;
  const int J = static_cast<int>(p.obstacles.size());
  if (g) g->setZero(z.size());

  std::vector<Pose2> xs(w.h + 1);
  std::vector<Eigen::Matrix<double, 3, Eigen::Dynamic>> S;  // d(xs[i])/dz
  xs[0] = w.current;
  if (g) {
    S.assign(w.h + 1, Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, z.size()));
  }
  for (int i = 0; i < w.h; ++i) {
    const Control2 u = control_at(z, i);
    xs[i + 1] = propagate_centroid(xs[i], u, Ts);
    if (g) {
      Eigen::Matrix3d A;
      Eigen::Matrix<double, 3, 2> B;
      centroid_step_jacobians(xs[i], u, Ts, A, B);
      S[i + 1] = A * S[i];
      S[i + 1].middleCols<2>(2 * i) += B;
    }
  }

  double L = 0.0;
  for (int i = 1; i <= w.h; ++i) {
    const double wn = (i == w.h) ? mp.terminal_weight : mp.state_weight;
    const Eigen::Vector3d r = pose_boxminus(xs[i], p.reference.poses[w.k + i]);
    L += wn * r.squaredNorm();
    if (g) *g += 2.0 * wn * (S[i].transpose() * r);
    for (int j = 0; j < J; ++j) {
      const Eigen::Vector2d diff = xs[i].position() - p.obstacles[j].center;
      const double d = diff.norm();
      const double c = p.safety_radius - d;
      const double lam = lambda[(i - 1) * J + j];
      const double m = std::max(0.0, lam + rho * c);
      L += (m * m - lam * lam) / (2.0 * rho);
      if (g && m > 0.0 && d > 1e-12) {
        const Eigen::Vector2d dc = -diff / d;  // d(c)/d(position)
        *g += m * (S[i].topRows<2>().transpose() * dc);
      }
    }
  }
  for (int i = 0; i < w.h; ++i) {
    const Control2 u = control_at(z, i);
    const Control2& ur = p.reference.controls[w.k + i];
    L += mp.control_weight * ((u.v - ur.v) * (u.v - ur.v) +
                              (u.omega - ur.omega) * (u.omega - ur.omega));
    if (g) {
      (*g)[2 * i] += 2.0 * mp.control_weight * (u.v - ur.v);
      (*g)[2 * i + 1] += 2.0 * mp.control_weight * (u.omega - ur.omega);
    }
  }
  return L;
}

}  // namespace

PlanStepResult mpc_c_step(const PlanProblem& p, const MpcParams& mp, int k, const Pose2& current,
                          bool allow_rotate) {
  const auto t0 = std::chrono::steady_clock::now();
  const Window w = make_window(p, mp, k, current);
  const int m = w.h * static_cast<int>(p.obstacles.size());

  Eigen::VectorXd z(2 * w.h);
  for (int i = 0; i < w.h; ++i) {
    z[2 * i] = p.reference.controls[k + i].v;
    z[2 * i + 1] = p.reference.controls[k + i].omega;
  }
  const double f0 = mpc_c_tracking(w, roll_window(w, z), z);

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  double rho = mp.rho_init;
  double prev_viol = kInf;
  int total_iters = 0;
  bool ls_failed = false;
  bool feasible = false;
  ConvergedBy by = ConvergedBy::max_iters;

  for (int outer = 0; outer < mp.max_outer_iters; ++outer) {
    const Objective obj = [&](const Eigen::VectorXd& zz, Eigen::VectorXd& gg) {
      return mpc_c_al_value(w, zz, lambda, rho, &gg);
    };
    BfgsOutcome r = bfgs_minimize(obj, z, mp.tol, mp.max_inner_iters);
    z = std::move(r.z);
    total_iters += r.iters;
    ls_failed = ls_failed || r.linesearch_failed;
    by = r.by;

    if (m == 0) {
      feasible = true;
      break;
    }
    const Eigen::VectorXd c = mpc_c_constraints(w, roll_window(w, z));
    const double viol = std::max(0.0, c.maxCoeff());
    if (viol <= mp.tol) {
      feasible = true;
      break;
    }
    lambda = (lambda + rho * c).cwiseMax(0.0);
    if (viol > 0.5 * prev_viol) rho *= 10.0;
    prev_viol = viol;
  }

  const std::vector<Pose2> xs = roll_window(w, z);
  PlanStepResult out;
  out.stats.iterations = total_iters;
  out.stats.initial_error = f0;
  out.stats.final_error = mpc_c_tracking(w, xs, z);
  out.stats.converged_by = by;
  out.linesearch_failed = ls_failed;
  out.constraint_violation = !feasible;
  out.predicted.assign(xs.begin() + 1, xs.end());
  finish_step(p, w.k, current, allow_rotate, control_at(z, 0), out);
  out.stats.wall_time = seconds_since(t0);
  return out;
}

Stepper make_stepper(SolverKind kind, const MpcParams& mp) {
  switch (kind) {
    case SolverKind::Ours:
      return [](const PlanProblem& p, int k, const Pose2& cur, bool allow_rotate) {
        return plan_step(p, k, cur, allow_rotate);
      };
    case SolverKind::MpcP:
      return [mp](const PlanProblem& p, int k, const Pose2& cur, bool allow_rotate) {
        return mpc_p_step(p, mp, k, cur, allow_rotate);
      };
    case SolverKind::MpcC:
      return [mp](const PlanProblem& p, int k, const Pose2& cur, bool allow_rotate) {
        return mpc_c_step(p, mp, k, cur, allow_rotate);
      };
  }
  throw std::invalid_argument("unknown solver kind");
}

}  // namespace haul
