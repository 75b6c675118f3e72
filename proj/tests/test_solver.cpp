#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "haul/graph.hpp"
#include "haul/solver.hpp"
#include "oracles.hpp"

using namespace haul;

namespace {

// Banded SPD matrix A = L L^T from a random lower-banded L with positive
// diagonal, loaded into both a BandMatrix and a dense copy.
struct BandedSpd {
  BandMatrix band;
  Eigen::MatrixXd dense;

  BandedSpd(int n, int bw, std::mt19937_64& g) : band(n, bw) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
      L(j, j) = oracle::uniform(g, 1.0, 2.0);
      for (int i = j + 1; i <= std::min(n - 1, j + bw); ++i) {
        L(i, j) = oracle::uniform(g, -0.5, 0.5);
      }
    }
    dense = L * L.transpose();
    for (int j = 0; j < n; ++j) {
      for (int i = j; i <= std::min(n - 1, j + bw); ++i) {
        band.at(i, j) = dense(i, j);
      }
    }
  }
};

LMParams tight_params() {
  LMParams p;
  p.rel_tol = 1e-12;
  p.abs_tol = 1e-12;
  p.err_tol = 1e-16;
  return p;
}

}  // namespace

TEST_CASE("band storage round-trips through dense and multiplies correctly") {
  auto g = oracle::rng(3);
  BandedSpd m(10, 3, g);
  CHECK(m.band.dim() == 10);
  CHECK(m.band.semi_bandwidth() == 3);
  CHECK(oracle::rel_diff(m.band.to_dense(), m.dense) < 1e-14);
  CHECK(oracle::rel_diff(m.band.diagonal(), m.dense.diagonal()) < 1e-14);
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd x(10);
    for (int i = 0; i < 10; ++i) x[i] = oracle::uniform(g, -1, 1);
    CHECK(oracle::rel_diff(m.band.multiply(x), m.dense * x) < 1e-13);
  }
}

TEST_CASE("a wide semi-bandwidth degenerates to a dense lower triangle") {
  auto g = oracle::rng(4);
  BandMatrix b(4, 100);  // clamped to dim-1
  CHECK(b.semi_bandwidth() == 3);
  BandedSpd m(4, 3, g);
  Eigen::VectorXd rhs(4);
  rhs << 1.0, -2.0, 0.5, 3.0;
  BandMatrix chol = m.band;
  REQUIRE(chol.cholesky_in_place());
  Eigen::VectorXd x = rhs;
  chol.cholesky_solve(x);
  CHECK(oracle::rel_diff(x, m.dense.fullPivLu().solve(rhs)) < 1e-12);
}

TEST_CASE("banded cholesky solves match a dense factorization") {
  auto g = oracle::rng(5);
  for (int t = 0; t < 20; ++t) {
    const int n = 4 + static_cast<int>(oracle::uniform(g, 0, 12));
    const int bw = 1 + static_cast<int>(oracle::uniform(g, 0, 6));
    BandedSpd m(n, std::min(bw, n - 1), g);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) rhs[i] = oracle::uniform(g, -2, 2);
    BandMatrix chol = m.band;
    REQUIRE(chol.cholesky_in_place());
    Eigen::VectorXd x = rhs;
    chol.cholesky_solve(x);
    CHECK(oracle::rel_diff(x, Eigen::VectorXd(m.dense.llt().solve(rhs))) < 1e-10);
  }
}

TEST_CASE("cholesky refuses matrices without strictly positive pivots") {
  BandMatrix b(2, 1);
  b.at(0, 0) = 1.0;
  b.at(1, 1) = -1.0;
  CHECK(!b.cholesky_in_place());

  BandMatrix z(3, 1);
  z.at(0, 0) = 1.0;  // leaves a zero pivot at (1,1)
  CHECK(!z.cholesky_in_place());
}

TEST_CASE("undamped normal solve on the identity returns the gradient step") {
  NormalSystem sys;
  sys.H = BandMatrix(3, 0);
  for (int i = 0; i < 3; ++i) sys.H.at(i, i) = 1.0;
  sys.g = Eigen::Vector3d(1.0, 0.0, 0.0);
  const Eigen::VectorXd d = solve_normal(sys, 0.0);
  CHECK((d - Eigen::Vector3d(1, 0, 0)).norm() < 1e-14);
}

TEST_CASE("normal solve matches the explicitly inverted damped system") {
  auto g = oracle::rng(6);
  for (int t = 0; t < 10; ++t) {
    BandedSpd m(10, 3, g);
    NormalSystem sys;
    sys.H = m.band;
    sys.g = Eigen::VectorXd(10);
    for (int i = 0; i < 10; ++i) sys.g[i] = oracle::uniform(g, -1, 1);
    for (const double lambda : {0.0, 0.3}) {
      const Eigen::MatrixXd damped =
          m.dense + lambda * Eigen::MatrixXd(m.dense.diagonal().asDiagonal());
      const Eigen::VectorXd want = damped.inverse() * sys.g;
      CHECK(oracle::rel_diff(solve_normal(sys, lambda), want) < 1e-9);
    }
  }
}

TEST_CASE("damping shrinks the step monotonically in the scaled norm") {
  auto g = oracle::rng(7);
  BandedSpd m(12, 3, g);
  NormalSystem sys;
  sys.H = m.band;
  sys.g = Eigen::VectorXd(12);
  for (int i = 0; i < 12; ++i) sys.g[i] = oracle::uniform(g, -1, 1);
  const Eigen::VectorXd scale = m.dense.diagonal().cwiseSqrt();
  double prev = (scale.asDiagonal() * solve_normal(sys, 0.0)).norm();
  for (const double lambda : {1e2, 1e4, 1e6}) {
    const double cur = (scale.asDiagonal() * solve_normal(sys, lambda)).norm();
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("negative damping is rejected") {
  NormalSystem sys;
  sys.H = BandMatrix(1, 0);
  sys.H.at(0, 0) = 1.0;
  sys.g = Eigen::VectorXd::Ones(1);
  CHECK_THROWS_AS(solve_normal(sys, -1e-9), std::invalid_argument);
}

TEST_CASE("a single pose prior is solved to its reference") {
  FactorGraph g;
  g.add_variable(pose_key(0));
  const Pose2 ref(0.7, -0.3, 0.2);
  g.add_factor(make_pose_prior(0, ref, DiagNoise::from({0.1, 0.1, 0.02})));
  Values init(0, 1, 0, 0);
  init.pose(0) = Pose2(0.2, 0.2, -0.3);
  const auto [best, stats] = lm_optimize(g, init, tight_params());
  CHECK(pose_boxminus(best.pose(0), ref).norm() < 1e-8);
  CHECK(stats.iterations <= 5);
  CHECK(stats.converged_by != ConvergedBy::max_iters);
}

TEST_CASE("two equal-weight priors meet at the midpoint") {
  FactorGraph g;
  g.add_variable(pose_key(0));
  const DiagNoise n = DiagNoise::from({0.1, 0.1, 0.02});
  g.add_factor(make_pose_prior(0, Pose2(1.0, 0.0, 0.0), n));
  g.add_factor(make_pose_prior(0, Pose2(0.0, 1.0, 0.0), n));
  Values init(0, 1, 0, 0);
  init.pose(0) = Pose2(0.0, 0.0, 0.0);
  const auto [best, stats] = lm_optimize(g, init, tight_params());
  CHECK(best.pose(0).x == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(best.pose(0).y == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(std::abs(best.pose(0).theta) < 1e-8);
}

TEST_CASE("prior-only graphs reach the weighted least-squares optimum") {
  auto g = oracle::rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    FactorGraph graph;
    graph.add_variable(pose_key(0));
    graph.add_variable(control_key(0));
    graph.add_variable(pose_key(1));

    // per-coordinate weighted means are the closed-form optimum
    Eigen::VectorXd wsum = Eigen::VectorXd::Zero(8);
    Eigen::VectorXd wref = Eigen::VectorXd::Zero(8);
    for (int n = 0; n < 2; ++n) {
      for (int rep = 0; rep < 2; ++rep) {
        const Pose2 ref(oracle::uniform(g, -1, 1), oracle::uniform(g, -1, 1),
                        oracle::uniform(g, -0.5, 0.5));
        Eigen::Vector3d var;
        for (int i = 0; i < 3; ++i) var[i] = oracle::uniform(g, 0.01, 1.0);
        graph.add_factor(make_pose_prior(n, ref, DiagNoise(var)));
        const int base = n == 0 ? 0 : 5;
        const Eigen::Vector3d r(ref.x, ref.y, ref.theta);
        for (int i = 0; i < 3; ++i) {
          wsum[base + i] += 1.0 / var[i];
          wref[base + i] += r[i] / var[i];
        }
      }
    }
    for (int rep = 0; rep < 2; ++rep) {
      const Control2 ref{oracle::uniform(g, -1, 1), oracle::uniform(g, -1, 1)};
      Eigen::Vector2d var;
      var << oracle::uniform(g, 0.01, 1.0), oracle::uniform(g, 0.01, 1.0);
      graph.add_factor(make_control_prior(0, ref, DiagNoise(var)));
      wsum[3] += 1.0 / var[0];
      wsum[4] += 1.0 / var[1];
      wref[3] += ref.v / var[0];
      wref[4] += ref.omega / var[1];
    }
    const Eigen::VectorXd want = wref.cwiseQuotient(wsum);

    Values init(0, 2, 0, 1);
    init.pose(0) = Pose2(oracle::uniform(g, -0.3, 0.3), oracle::uniform(g, -0.3, 0.3), 0.0);
    init.pose(1) = Pose2(oracle::uniform(g, -0.3, 0.3), oracle::uniform(g, -0.3, 0.3), 0.0);
    init.control(0) = Control2{0.0, 0.0};
    const auto [best, stats] = lm_optimize(graph, init, tight_params());

    Eigen::VectorXd got(8);
    got << best.pose(0).x, best.pose(0).y, best.pose(0).theta, best.control(0).v,
        best.control(0).omega, best.pose(1).x, best.pose(1).y, best.pose(1).theta;
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(stats.final_error <= stats.initial_error);
  }
}

namespace {

// Straight-line chain: anchor at the start, consistent pose/control references,
// motion coupling. Global optimum cost is exactly zero.
std::pair<FactorGraph, Values> make_chain(double dx, double dy) {
  const double Ts = 0.1;
  const Control2 u_ref{0.5, 0.0};
  std::vector<Pose2> refs{Pose2(dx, dy, 0.0)};
  for (int k = 0; k < 3; ++k) refs.push_back(propagate_centroid(refs.back(), u_ref, Ts));

  FactorGraph g;
  for (int k = 0; k < 3; ++k) {
    g.add_variable(pose_key(k));
    g.add_variable(control_key(k));
  }
  g.add_variable(pose_key(3));
  g.add_factor(make_anchor(0, refs[0]));
  const DiagNoise pose_n = DiagNoise::from({0.1, 0.1, 0.02});
  const DiagNoise ctrl_n = DiagNoise::from({0.1, 0.1});
  const DiagNoise motion_n = DiagNoise::from({1e-4, 1e-4, 2e-5});
  for (int k = 1; k <= 3; ++k) g.add_factor(make_pose_prior(k, refs[k], pose_n));
  for (int k = 0; k < 3; ++k) {
    g.add_factor(make_control_prior(k, u_ref, ctrl_n));
    g.add_factor(make_motion(k, Ts, motion_n));
  }

  Values init(0, 4, 0, 3);
  for (int k = 0; k <= 3; ++k) {
    init.pose(k) = Pose2(refs[k].x + 0.03 * (k + 1), refs[k].y - 0.02 * k, 0.01 * k);
  }
  for (int k = 0; k < 3; ++k) init.control(k) = Control2{0.4, 0.05};
  return {std::move(g), std::move(init)};
}

}  // namespace

TEST_CASE("translating the whole problem translates the solution") {
  LMParams p;
  p.rel_tol = 1e-10;
  p.abs_tol = 1e-10;
  p.err_tol = 1e-12;
  auto [g0, v0] = make_chain(0.0, 0.0);
  auto [g1, v1] = make_chain(1.3, -0.7);
  const auto [a, sa] = lm_optimize(g0, v0, p);
  const auto [b, sb] = lm_optimize(g1, v1, p);
  for (int k = 0; k <= 3; ++k) {
    CHECK(b.pose(k).x - a.pose(k).x == doctest::Approx(1.3).epsilon(1e-6));
    CHECK(b.pose(k).y - a.pose(k).y == doctest::Approx(-0.7).epsilon(1e-6));
    CHECK(b.pose(k).theta == doctest::Approx(a.pose(k).theta).epsilon(1e-6));
  }
  for (int k = 0; k < 3; ++k) {
    CHECK(b.control(k).v == doctest::Approx(a.control(k).v).epsilon(1e-6));
    CHECK(b.control(k).omega == doctest::Approx(a.control(k).omega).epsilon(1e-6));
  }
}

TEST_CASE("chain with consistent references is driven to near-zero cost") {
  auto [g, init] = make_chain(0.0, 0.0);
  LMParams p;
  p.rel_tol = 1e-10;
  p.abs_tol = 1e-10;
  p.err_tol = 1e-12;
  const auto [best, stats] = lm_optimize(g, init, p);
  CHECK(stats.final_error < 1e-10);
  CHECK(stats.final_error <= stats.initial_error);
  CHECK(stats.converged_by != ConvergedBy::max_iters);
  CHECK(stats.wall_time >= 0.0);
}

TEST_CASE("an already-satisfied problem returns immediately") {
  FactorGraph g;
  g.add_variable(pose_key(0));
  const Pose2 ref(0.3, 0.4, -0.2);
  g.add_factor(make_pose_prior(0, ref, DiagNoise::from({0.1, 0.1, 0.02})));
  Values init(0, 1, 0, 0);
  init.pose(0) = ref;
  const auto [best, stats] = lm_optimize(g, init, LMParams{});
  CHECK(stats.iterations == 0);
  CHECK(stats.converged_by == ConvergedBy::err);
  CHECK(stats.initial_error == 0.0);
  CHECK(stats.final_error == 0.0);
}

TEST_CASE("an unconstrained variable makes the solve diverge with best values attached") {
  FactorGraph g;
  g.add_variable(pose_key(0));
  g.add_variable(pose_key(1));  // no factor touches it: singular at every lambda
  g.add_factor(make_pose_prior(0, Pose2(1.0, 0.0, 0.0), DiagNoise::from({0.1, 0.1, 0.02})));
  Values init(0, 2, 0, 0);
  init.pose(0) = Pose2(0.0, 0.0, 0.0);
  init.pose(1) = Pose2(5.0, 5.0, 0.5);
  try {
    lm_optimize(g, init, LMParams{});
    FAIL("expected SolverDivergedError");
  } catch (const SolverDivergedError& e) {
    CHECK(e.best_values.pose(0).x == 0.0);  // nothing was ever accepted
    CHECK(e.best_values.pose(1).x == 5.0);
    CHECK(e.stats.final_error == e.stats.initial_error);
    CHECK(e.stats.iterations == 1);
  }
}
