#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "framerl/records.hpp"

namespace framerl {

// Frame-budget and behavior statistics over a trajectory log.
// Invariant: mean_frames * episodes == total_frames within 1e-9.
struct StatsReport {
  std::int64_t episodes = 0;
  std::int64_t total_frames = 0;
  double mean_frames = 0.0;
  double tool_call_rate = 0.0;      // fraction of episodes with >= 1 extraction
  double format_invalid_rate = 0.0;
  std::map<std::string, std::int64_t> per_dimension;  // present only when QA records joined
  std::map<std::string, std::int64_t> reward_histogram;  // present only when rewards joined

  nlohmann::json to_json() const;
};

// Histogram bin label for a total reward. 8 bins of width 0.25 over
// [-0.25, 1.75); out-of-range values clamp into the end bins.
std::string reward_bin_label(double total);

// Aggregates are integer sums so serial and parallel results are bit-exact.
StatsReport collect_stats_serial(const std::vector<TrajectoryRecord>& records);
StatsReport collect_stats_parallel(const std::vector<TrajectoryRecord>& records, int jobs);

// Joins task dimensions (by qa_id) and reward totals (by qa_id + rollout)
// into the counts; unmatched records count under "unknown".
void join_dimensions(StatsReport& report, const std::vector<TrajectoryRecord>& records,
                     const std::vector<QARecord>& qa_records);
void join_rewards(StatsReport& report, const std::vector<RewardRecord>& rewards);

}  // namespace framerl
