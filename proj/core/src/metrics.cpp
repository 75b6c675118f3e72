#include "haul/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace haul {

RunMetrics compute_metrics(const MissionLog& log, const PlanProblem& p) {
  RunMetrics m;
  m.steps = static_cast<int>(log.executed_centroid.size());
  m.events_seen = static_cast<int>(log.events.size());

  if (m.steps > 0) {
    double sum = 0.0;
    for (int t = 0; t < m.steps; ++t) {
      const Pose2& ref = p.reference.poses[log.ref_index[t]];
      sum += (log.executed_centroid[t].position() - ref.position()).norm();
    }
    m.avg_deviation = sum / m.steps;

    double time_sum = 0.0;
    for (const SolveStats& s : log.solve_stats) time_sum += s.wall_time;
    m.mean_opt_time = time_sum / m.steps;
  }

  // Pairwise distances are taken against the first step's observation; a pair
  // contributes only while both robots are still reporting.
  std::map<std::pair<int, int>, double> base;
  if (!log.executed_robots.empty()) {
    const auto& first = log.executed_robots.front();
    for (std::size_t a = 0; a < first.size(); ++a)
      for (std::size_t b = a + 1; b < first.size(); ++b)
        base[{first[a].first, first[b].first}] =
            (first[a].second.position() - first[b].second.position()).norm();

    auto scan = [&](const std::vector<std::pair<int, Pose2>>& robots) {
      for (std::size_t a = 0; a < robots.size(); ++a)
        for (std::size_t b = a + 1; b < robots.size(); ++b) {
          const auto it = base.find({robots[a].first, robots[b].first});
          if (it == base.end()) continue;
          const double d = (robots[a].second.position() - robots[b].second.position()).norm();
          m.max_inter_robot_error = std::max(m.max_inter_robot_error, std::abs(d - it->second));
        }
    };
    for (const auto& robots : log.executed_robots) scan(robots);
    scan(log.final_robots);
  }

  for (int t = 0; t + 1 < m.steps; ++t)
    m.path_length +=
        (log.executed_centroid[t + 1].position() - log.executed_centroid[t].position()).norm();
  if (m.steps > 0)
    m.path_length += (log.final_centroid.position() - log.executed_centroid.back().position()).norm();

  m.dist_to_goal = (log.final_centroid.position() - p.goal()).norm();
  return m;
}

}  // namespace haul
