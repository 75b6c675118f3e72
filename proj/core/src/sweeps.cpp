#include "haul/sweeps.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <thread>

namespace haul {

MissionOutcome run_one(const ScenarioConfig& cfg) {
  const PlanProblem p = to_plan_problem(cfg);
  WorldState world = make_world(cfg);
  const Stepper stepper = make_stepper(cfg.solver, effective_mpc(cfg));
  MissionOutcome out;
  out.log = run_mission(p, world, stepper);
  out.metrics = compute_metrics(out.log, p);
  return out;
}

namespace {

struct Job {
  ScenarioConfig cfg;
  int run = 0;
};

std::vector<RunRecord> execute(const std::vector<Job>& jobs, bool serial) {
  std::vector<RunRecord> out(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());

  const auto work = [&](std::size_t i) {
    try {
      const Job& jb = jobs[i];
      RunRecord r;
      r.scenario = jb.cfg.name;
      r.solver = solver_name(jb.cfg.solver);
      r.run = jb.run;
      r.seed = jb.cfg.seed;
      r.config_hash = config_hash(jb.cfg);
      r.metrics = run_one(jb.cfg).metrics;
      out[i] = std::move(r);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const unsigned hw = std::thread::hardware_concurrency();
  if (serial || jobs.size() <= 1 || hw <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (serial &&
          (i == 0 || jobs[i].cfg.name != jobs[i - 1].cfg.name ||
           jobs[i].cfg.solver != jobs[i - 1].cfg.solver)) {
        run_one(jobs[i].cfg);  // discarded warm-up at each configuration boundary
      }
      work(i);
    }
  } else {
    const unsigned n = std::min<std::size_t>(hw, jobs.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (unsigned t = 0; t < n; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) work(i);
      });
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<Job> repeated(ScenarioConfig cfg, int repeat) {
  if (repeat < 1) throw std::invalid_argument("repeat must be at least 1");
  std::vector<Job> jobs;
  jobs.reserve(repeat);
  for (int r = 0; r < repeat; ++r) jobs.push_back({cfg, r});
  return jobs;
}

}  // namespace

std::vector<RunRecord> run_repeated(const ScenarioConfig& cfg, int repeat, bool serial) {
  return execute(repeated(cfg, repeat), serial);
}

std::vector<RunRecord> sweep_robots(const ScenarioConfig& base, const std::vector<int>& counts,
                                    const std::vector<SolverKind>& solvers, int repeat,
                                    bool serial) {
  std::vector<Job> jobs;
  for (const int count : counts) {
    if (count < 1) throw std::invalid_argument("robot counts must be at least 1");
    for (const SolverKind solver : solvers) {
      ScenarioConfig cfg = base;
      cfg.robots = count;
      cfg.solver = solver;
      cfg.name = base.name + "-I" + std::to_string(count);
      for (const Job& j : repeated(cfg, repeat)) jobs.push_back(j);
    }
  }
  return execute(jobs, serial);
}

std::vector<RunRecord> sweep_obstacles(const ScenarioConfig& base, const std::vector<int>& counts,
                                       const std::vector<SolverKind>& solvers, int repeat,
                                       bool serial) {
  std::vector<Job> jobs;
  for (const int count : counts) {
    if (count < 0 || count > static_cast<int>(base.obstacles.size()))
      throw std::invalid_argument("obstacle count exceeds the scenario's obstacle list");
    for (const SolverKind solver : solvers) {
      ScenarioConfig cfg = base;
      cfg.obstacles.assign(base.obstacles.begin(), base.obstacles.begin() + count);
      cfg.solver = solver;
      cfg.name = base.name + "-J" + std::to_string(count);
      for (const Job& j : repeated(cfg, repeat)) jobs.push_back(j);
    }
  }
  return execute(jobs, serial);
}

std::vector<RunRecord> compare_solvers(const ScenarioConfig& base,
                                       const std::vector<SolverKind>& solvers, int repeat,
                                       bool serial) {
  std::vector<Job> jobs;
  for (const SolverKind solver : solvers) {
    ScenarioConfig cfg = base;
    cfg.solver = solver;
    for (const Job& j : repeated(cfg, repeat)) jobs.push_back(j);
  }
  return execute(jobs, serial);
}

void emit_csv(const std::vector<RunRecord>& rows, std::ostream& out) {
  out << "scenario,solver,run,seed,config_hash,steps,events_seen,avg_deviation,"
         "max_inter_robot_error,mean_opt_time,path_length,dist_to_goal\n";
  char buf[512];
  for (const RunRecord& r : rows) {
    const RunMetrics& m = r.metrics;
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%llu,%s,%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  r.scenario.c_str(), r.solver.c_str(), r.run,
                  static_cast<unsigned long long>(r.seed), r.config_hash.c_str(), m.steps,
                  m.events_seen, m.avg_deviation, m.max_inter_robot_error, m.mean_opt_time,
                  m.path_length, m.dist_to_goal);
    out << buf;
  }
}

void emit_csv(const std::vector<RunRecord>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  emit_csv(rows, out);
}

}  // namespace haul
