#pragma once

#include <iosfwd>

#include "haul/metrics.hpp"
#include "haul/scenario.hpp"

namespace haul {

// One CSV row: a configured mission executed start to finish.
struct RunRecord {
  std::string scenario;
  std::string solver;
  int run = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  RunMetrics metrics;
};

struct MissionOutcome {
  MissionLog log;
  RunMetrics metrics;
};

// Executes one configured mission.
MissionOutcome run_one(const ScenarioConfig& cfg);

// Same configuration `repeat` times (run = 0..repeat-1). Identical seeds, so
// noiseless configurations must reproduce identical metrics; repeats exist to
// average timing. serial = true keeps runs off the worker pool so wall-clock
// timings are not distorted by contention.
std::vector<RunRecord> run_repeated(const ScenarioConfig& cfg, int repeat, bool serial);

// Team-size scaling study: the base course with the robot count swept.
std::vector<RunRecord> sweep_robots(const ScenarioConfig& base, const std::vector<int>& counts,
                                    const std::vector<SolverKind>& solvers, int repeat,
                                    bool serial);

// Obstacle-count scaling study: prefixes of the base obstacle list, so a
// count of 5 runs against exactly the first five obstacles.
std::vector<RunRecord> sweep_obstacles(const ScenarioConfig& base, const std::vector<int>& counts,
                                       const std::vector<SolverKind>& solvers, int repeat,
                                       bool serial);

// The base course under each solver.
std::vector<RunRecord> compare_solvers(const ScenarioConfig& base,
                                       const std::vector<SolverKind>& solvers, int repeat,
                                       bool serial);

void emit_csv(const std::vector<RunRecord>& rows, std::ostream& out);
void emit_csv(const std::vector<RunRecord>& rows, const std::string& path);

}  // namespace haul
