#include <doctest.h>

#include <stdexcept>

#include "haul/graph.hpp"
#include "haul/solver.hpp"
#include "oracles.hpp"

using namespace haul;

namespace {

// Independent reassembly of the stacked whitened system: a dense jacobian with
// each factor block scattered to its variable's column offset.
Eigen::MatrixXd dense_jacobian(const FactorGraph& g, const Values& v, Eigen::VectorXd& r_out) {
  int rows = 0;
  for (const Factor& f : g.factors()) rows += evaluate_factor(f, v).dim;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(rows, g.total_dim());
  r_out = Eigen::VectorXd::Zero(rows);
  int row = 0;
  for (const Factor& f : g.factors()) {
    const Residual r = evaluate_factor(f, v);
    r_out.segment(row, r.dim) = r.value.head(r.dim);
    for (int b = 0; b < r.n_blocks; ++b) {
      J.block(row, g.offset_of(f.keys[b]), r.dim, r.block_cols[b]) = r.jacobian(b);
    }
    row += r.dim;
  }
  return J;
}

// Two-step fixture with both obstacle regimes (one active, one not) and every
// factor kind present.
struct TwoStep {
  FactorGraph g;
  Values v{0, 3, 0, 2};

  TwoStep() {
    g.add_variable(pose_key(0));
    g.add_variable(control_key(0));
    g.add_variable(pose_key(1));
    g.add_variable(control_key(1));
    g.add_variable(pose_key(2));

    const DiagNoise pose_n = DiagNoise::from({0.1, 0.1, 0.02});
    const DiagNoise ctrl_n = DiagNoise::from({0.1, 0.1});
    const DiagNoise motion_n = DiagNoise::from({1e-4, 1e-4, 2e-5});
    const DiagNoise obs_n = DiagNoise::from({1e-2});

    g.add_factor(make_anchor(0, Pose2(0.05, -0.02, 0.01)));
    g.add_factor(make_pose_prior(1, Pose2(0.5, 0.0, 0.0), pose_n));
    g.add_factor(make_pose_prior(2, Pose2(1.0, 0.0, 0.0), pose_n));
    g.add_factor(make_control_prior(0, Control2{0.5, 0.0}, ctrl_n));
    g.add_factor(make_control_prior(1, Control2{0.5, 0.0}, ctrl_n));
    g.add_factor(make_motion(0, 0.1, motion_n));
    g.add_factor(make_motion(1, 0.1, motion_n));
    g.add_factor(make_obstacle(1, Eigen::Vector2d(0.5, 0.1), 0.5, obs_n));   // active
    g.add_factor(make_obstacle(2, Eigen::Vector2d(5.0, 5.0), 0.5, obs_n));   // inactive

    v.pose(0) = Pose2(0.02, 0.01, 0.03);
    v.control(0) = Control2{0.45, 0.1};
    v.pose(1) = Pose2(0.55, -0.03, 0.05);
    v.control(1) = Control2{0.5, -0.1};
    v.pose(2) = Pose2(0.95, 0.02, -0.02);
  }
};

}  // namespace

TEST_CASE("values are range-checked views over contiguous index ranges") {
  Values v(2, 3, 2, 2);
  CHECK(v.n_poses() == 3);
  CHECK(v.pose_first() == 2);
  v.pose(4) = Pose2(1, 2, 3);
  CHECK(v.pose(4).x == 1.0);
  CHECK_THROWS_AS(v.pose(1), std::out_of_range);
  CHECK_THROWS_AS(v.pose(5), std::out_of_range);
  CHECK_THROWS_AS(v.control(4), std::out_of_range);
  CHECK(v.has(pose_key(2)));
  CHECK(v.has(control_key(3)));
  CHECK(!v.has(pose_key(5)));
  CHECK(!v.has(control_key(1)));
}

TEST_CASE("empty graph costs nothing") {
  FactorGraph g;
  CHECK(total_error(g, Values{}) == 0.0);
  CHECK(g.num_variables() == 0);
  CHECK(g.total_dim() == 0);
}

TEST_CASE("total error is the sum of per-factor errors and matches full evaluation") {
  TwoStep fix;
  double by_parts = 0.0;
  double by_residual = 0.0;
  for (const Factor& f : fix.g.factors()) {
    by_parts += factor_error(f, fix.v);
    by_residual += evaluate_factor(f, fix.v).squared_norm();
  }
  const double total = total_error(fix.g, fix.v);
  CHECK(total == doctest::Approx(by_parts).epsilon(1e-12));
  CHECK(total == doctest::Approx(by_residual).epsilon(1e-10));
  CHECK(total > 0.0);
}

TEST_CASE("cost is zero at a configuration satisfying every factor") {
  FactorGraph g;
  g.add_variable(pose_key(0));
  g.add_variable(control_key(0));
  g.add_variable(pose_key(1));
  const Pose2 start(0.0, 0.0, 0.0);
  const Control2 u{0.5, 0.0};
  const Pose2 next = propagate_centroid(start, u, 0.1);
  g.add_factor(make_anchor(0, start));
  g.add_factor(make_pose_prior(1, next, DiagNoise::from({0.1, 0.1, 0.02})));
  g.add_factor(make_control_prior(0, u, DiagNoise::from({0.1, 0.1})));
  g.add_factor(make_motion(0, 0.1, DiagNoise::from({1e-4, 1e-4, 2e-5})));
  g.add_factor(make_obstacle(1, Eigen::Vector2d(3.0, 0.0), 0.5, DiagNoise::from({1e-2})));

  Values v(0, 2, 0, 1);
  v.pose(0) = start;
  v.control(0) = u;
  v.pose(1) = next;
  CHECK(total_error(g, v) < 1e-18);
}

TEST_CASE("linearizing a lone anchor yields the whitened identity system") {
  FactorGraph g;
  g.add_variable(pose_key(0));
  const Pose2 ref(1.0, -2.0, 0.4);
  g.add_factor(make_anchor(0, ref));
  Values v(0, 1, 0, 0);
  v.pose(0) = Pose2(1.1, -2.2, 0.45);

  const NormalSystem sys = linearize(g, v);
  CHECK(sys.H.dim() == 3);
  const Eigen::MatrixXd H = sys.H.to_dense();
  for (int i = 0; i < 3; ++i) {
    CHECK(H(i, i) == doctest::Approx(1e12).epsilon(1e-9));
    for (int j = 0; j < i; ++j) CHECK(H(i, j) == 0.0);
  }
  const Eigen::Vector3d raw = pose_boxminus(v.pose(0), ref);
  for (int i = 0; i < 3; ++i) {
    CHECK(sys.g[i] == doctest::Approx(-1e12 * raw[i]).epsilon(1e-9));
  }
  CHECK(sys.error == doctest::Approx(1e12 * raw.squaredNorm()).epsilon(1e-9));
}

TEST_CASE("banded normal equations match a dense independent assembly") {
  TwoStep fix;
  const NormalSystem sys = linearize(fix.g, fix.v);

  Eigen::VectorXd r;
  const Eigen::MatrixXd J = dense_jacobian(fix.g, fix.v, r);
  const Eigen::MatrixXd H_ref = J.transpose() * J;
  const Eigen::VectorXd g_ref = -J.transpose() * r;

  const Eigen::MatrixXd H = sys.H.to_dense();
  CHECK(oracle::rel_diff(H, H_ref) < 1e-10);
  CHECK(oracle::rel_diff(sys.g, g_ref) < 1e-10);
  CHECK(sys.error == doctest::Approx(r.squaredNorm()).epsilon(1e-10));
  CHECK(sys.error == doctest::Approx(total_error(fix.g, fix.v)).epsilon(1e-10));

  // symmetric by construction of the band completion
  CHECK((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);
  // interleaved x, u, x ordering keeps every factor inside an 8-column window
  CHECK(fix.g.semi_bandwidth() == 7);
  CHECK(fix.g.total_dim() == 13);
}

TEST_CASE("linearization is the quadratic model of the cost") {
  TwoStep fix;
  const NormalSystem sys = linearize(fix.g, fix.v);
  const double e0 = total_error(fix.g, fix.v);
  auto g = oracle::rng(17);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd d(fix.g.total_dim());
    for (int i = 0; i < d.size(); ++i) d[i] = oracle::uniform(g, -1e-5, 1e-5);
    const double predicted = e0 - 2.0 * sys.g.dot(d) + d.dot(sys.H.multiply(d));
    const double actual = total_error(fix.g, fix.g.retract(fix.v, d));
    CHECK(std::abs(actual - predicted) < 1e-8 * std::max(1.0, e0));
  }
}

TEST_CASE("retract applies boxplus to poses and plain addition to controls") {
  FactorGraph g;
  g.add_variable(pose_key(0));
  g.add_variable(control_key(0));
  Values v(0, 1, 0, 1);
  v.pose(0) = Pose2(1.0, 2.0, 3.0);
  v.control(0) = Control2{0.5, -0.25};

  Eigen::VectorXd d(5);
  d << 0.01, -0.02, 0.3, 0.5, -0.25;  // heading 3.0 + 0.3 wraps past pi
  const Values out = g.retract(v, d);
  const Pose2 want = pose_boxplus(v.pose(0), Eigen::Vector3d(0.01, -0.02, 0.3));
  CHECK(out.pose(0).x == doctest::Approx(want.x));
  CHECK(out.pose(0).y == doctest::Approx(want.y));
  CHECK(out.pose(0).theta == doctest::Approx(want.theta));
  CHECK(out.pose(0).theta == doctest::Approx(3.3 - 2.0 * M_PI));
  CHECK(out.control(0).v == doctest::Approx(1.0));
  CHECK(out.control(0).omega == doctest::Approx(-0.5));

  CHECK_THROWS_AS(g.retract(v, Eigen::VectorXd::Zero(4)), std::invalid_argument);
}

TEST_CASE("registration is guarded") {
  FactorGraph g;
  g.add_variable(pose_key(0));
  CHECK_THROWS_AS(g.add_variable(pose_key(0)), std::invalid_argument);
  g.add_variable(control_key(0));  // same index, different type: fine
  CHECK_THROWS_AS(g.add_factor(make_pose_prior(1, Pose2(), DiagNoise::from({1, 1, 1}))),
                  std::invalid_argument);
  CHECK_THROWS_AS(g.offset_of(pose_key(7)), std::out_of_range);
  CHECK(g.offset_of(pose_key(0)) == 0);
  CHECK(g.offset_of(control_key(0)) == 3);
}
