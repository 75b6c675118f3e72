#pragma once

#include "haul/planner.hpp"

namespace haul {

// Summary statistics of one executed mission.
struct RunMetrics {
  double avg_deviation = 0.0;  // mean centroid distance to the waypoint it was tracking
  double max_inter_robot_error = 0.0;  // worst drift of any pairwise robot distance
  double mean_opt_time = 0.0;          // mean per-step planning time, seconds
  double path_length = 0.0;            // centroid arc length actually driven
  double dist_to_goal = 0.0;           // at termination
  int steps = 0;
  int events_seen = 0;
};

RunMetrics compute_metrics(const MissionLog& log, const PlanProblem& p);

}  // namespace haul
