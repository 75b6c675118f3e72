// Benchmark harness: runs scenarios, scaling sweeps, and solver comparisons,
// emitting metrics as CSV.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "haul/sweeps.hpp"

namespace {

using namespace haul;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<SolverKind> parse_solvers(const std::string& csv) {
  std::vector<SolverKind> out;
  for (const std::string& name : split_csv(csv)) out.push_back(solver_from_name(name));
  if (out.empty()) throw ScenarioError("no solvers given");
  return out;
}

std::vector<int> parse_counts(const std::string& csv) {
  std::vector<int> out;
  for (const std::string& item : split_csv(csv)) out.push_back(std::stoi(item));
  if (out.empty()) throw ScenarioError("no counts given");
  return out;
}

void write_rows(const std::vector<RunRecord>& rows, const std::string& out_path) {
  if (out_path.empty()) {
    emit_csv(rows, std::cout);
  } else {
    emit_csv(rows, out_path);
    std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
  }
}

void dump_trajectory(const MissionLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << "step,entity,x,y,theta\n";
  char buf[160];
  const auto row = [&](int step, const std::string& entity, const Pose2& p) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.9g,%.9g,%.9g\n", step, entity.c_str(), p.x, p.y,
                  p.theta);
    out << buf;
  };
  for (std::size_t t = 0; t < log.executed_centroid.size(); ++t) {
    row(static_cast<int>(t), "centroid", log.executed_centroid[t]);
    for (const auto& [i, pose] : log.executed_robots[t])
      row(static_cast<int>(t), "robot" + std::to_string(i), pose);
  }
  const int tf = static_cast<int>(log.executed_centroid.size());
  row(tf, "centroid", log.final_centroid);
  for (const auto& [i, pose] : log.final_robots) row(tf, "robot" + std::to_string(i), pose);
}

#define SELF_CHECK(name, cond)                      \
  do {                                              \
    if (cond) {                                     \
      std::cout << "[PASS] " << (name) << "\n";     \
    } else {                                        \
      std::cout << "[FAIL] " << (name) << "\n";     \
      ok = false;                                   \
    }                                               \
  } while (0)

int selftest() {
  bool ok = true;

  SELF_CHECK("angle wrap range", wrap_angle(3.0 * M_PI) == M_PI && wrap_angle(-M_PI) == M_PI &&
                                     std::abs(wrap_angle(0.1) - 0.1) < 1e-15);

  {
    // Motion-model Jacobians against central differences.
    const DiagNoise noise = DiagNoise::from({1e-4, 1e-4, 2e-5});
    const Factor f = make_motion(0, 0.1, noise);
    bool jac_ok = true;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int trial = 0; trial < 200 && jac_ok; ++trial) {
      const Pose2 x(u(rng), u(rng), u(rng));
      const Control2 c{u(rng), u(rng)};
      const Pose2 xn(u(rng), u(rng), u(rng));
      const Residual r = eval_motion(f, x, c, xn);
      const double h = 1e-6;
      // block 0: d residual / d x
      for (int col = 0; col < 3; ++col) {
        Pose2 xp = x, xm = x;
        (col == 0 ? xp.x : col == 1 ? xp.y : xp.theta) += h;
        (col == 0 ? xm.x : col == 1 ? xm.y : xm.theta) -= h;
        const Eigen::Vector3d fd =
            (eval_motion(f, xp, c, xn).value - eval_motion(f, xm, c, xn).value) / (2 * h);
        if ((fd - r.jac[0].col(col)).norm() > 1e-5 * (1.0 + fd.norm())) jac_ok = false;
      }
    }
    SELF_CHECK("motion Jacobian matches finite differences", jac_ok);
  }

  {
    // Two priors on one pose: the optimum is their precision-weighted mean.
    FactorGraph g;
    Values v(0, 1, 0, 0);
    v.pose(0) = Pose2(0.3, -0.2, 0.1);
    g.add_variable(pose_key(0));
    g.add_factor(make_pose_prior(0, Pose2(1.0, 0.0, 0.0), DiagNoise::from({1.0, 1.0, 1.0})));
    g.add_factor(make_pose_prior(0, Pose2(0.0, 1.0, 0.0), DiagNoise::from({0.25, 0.25, 0.25})));
    LMParams lp;
    lp.rel_tol = 1e-12;
    lp.abs_tol = 1e-12;
    lp.err_tol = 1e-12;
    lp.max_iters = 50;
    const auto [sol, stats] = lm_optimize(g, v, lp);
    const double wx = (1.0 * 1.0 + 0.0 * 4.0) / 5.0;
    const double wy = (0.0 * 1.0 + 1.0 * 4.0) / 5.0;
    SELF_CHECK("quadratic graph optimum",
               std::abs(sol.pose(0).x - wx) < 1e-6 && std::abs(sol.pose(0).y - wy) < 1e-6);
  }

  {
    // Short obstacle-free mission reaches its goal.
    ScenarioConfig cfg;
    cfg.name = "selftest";
    cfg.start = Pose2(0.0, 0.0, 0.0);
    cfg.goal = {2.0, 0.0};
    cfg.steps = 20;
    const MissionOutcome r = run_one(cfg);
    SELF_CHECK("short mission reaches goal",
               r.log.reached_goal && r.metrics.dist_to_goal <= cfg.goal_tol);
  }

  std::cout << (ok ? "selftest passed\n" : "selftest FAILED\n");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-robot payload transport benchmark"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_path;
  std::string traj_path;
  std::string solvers_csv;
  std::string counts_csv;
  std::uint64_t seed = 0;
  int repeat = 1;
  bool serial = false;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("scenario", scenario_path, "scenario JSON file")->required();
    cmd->add_option("--out", out_path, "write CSV here instead of stdout");
    cmd->add_option("--seed", seed, "override the scenario seed");
    cmd->add_option("--repeat", repeat, "runs per configuration")->check(CLI::PositiveNumber);
    cmd->add_flag("--serial-timing", serial, "run missions one at a time for clean timings");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "execute one scenario");
  add_common(run_cmd);
  run_cmd->add_option("--traj", traj_path, "dump the executed trajectory to this CSV");

  CLI::App* robots_cmd = app.add_subcommand("sweep-robots", "scaling study over team size");
  add_common(robots_cmd);
  robots_cmd->add_option("--counts", counts_csv, "robot counts (default 4,8,16,32,64,128)");
  robots_cmd->add_option("--solvers", solvers_csv, "solvers to sweep (default ours)");

  CLI::App* obstacles_cmd =
      app.add_subcommand("sweep-obstacles", "scaling study over obstacle count");
  add_common(obstacles_cmd);
  obstacles_cmd->add_option("--counts", counts_csv, "obstacle-list prefixes (default 1,2,5,7)");
  obstacles_cmd->add_option("--solvers", solvers_csv,
                            "solvers to sweep (default ours,mpc_p,mpc_c)");

  CLI::App* compare_cmd = app.add_subcommand("compare", "same course under several solvers");
  add_common(compare_cmd);
  compare_cmd->add_option("--solvers", solvers_csv,
                          "solvers to compare (default ours,mpc_p,mpc_c)");

  app.add_subcommand("selftest", "quick built-in checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("selftest")) return selftest();

    ScenarioConfig cfg = load_scenario(scenario_path);
    const bool seed_given =
        app.get_subcommands().front()->count("--seed") > 0;
    if (seed_given) cfg.seed = seed;

    if (app.got_subcommand(run_cmd)) {
      write_rows(run_repeated(cfg, repeat, serial), out_path);
      if (!traj_path.empty()) {
        dump_trajectory(run_one(cfg).log, traj_path);
        std::cout << "wrote trajectory to " << traj_path << "\n";
      }
    } else if (app.got_subcommand(robots_cmd)) {
      const std::vector<int> counts =
          counts_csv.empty() ? std::vector<int>{4, 8, 16, 32, 64, 128} : parse_counts(counts_csv);
      const std::vector<SolverKind> solvers =
          solvers_csv.empty() ? std::vector<SolverKind>{SolverKind::Ours}
                              : parse_solvers(solvers_csv);
      write_rows(sweep_robots(cfg, counts, solvers, repeat, serial), out_path);
    } else if (app.got_subcommand(obstacles_cmd)) {
      const std::vector<int> counts =
          counts_csv.empty() ? std::vector<int>{1, 2, 5, 7} : parse_counts(counts_csv);
      const std::vector<SolverKind> solvers =
          solvers_csv.empty()
              ? std::vector<SolverKind>{SolverKind::Ours, SolverKind::MpcP, SolverKind::MpcC}
              : parse_solvers(solvers_csv);
      write_rows(sweep_obstacles(cfg, counts, solvers, repeat, serial), out_path);
    } else if (app.got_subcommand(compare_cmd)) {
      const std::vector<SolverKind> solvers =
          solvers_csv.empty()
              ? std::vector<SolverKind>{SolverKind::Ours, SolverKind::MpcP, SolverKind::MpcC}
              : parse_solvers(solvers_csv);
      write_rows(compare_solvers(cfg, solvers, repeat, serial), out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
