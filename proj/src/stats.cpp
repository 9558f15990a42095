#include "framerl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "framerl/protocol.hpp"

namespace framerl {

std::string reward_bin_label(double total) {
  int bin = static_cast<int>(std::floor((total + 0.25) / 0.25));
  bin = std::clamp(bin, 0, 7);
  const double lo = -0.25 + 0.25 * bin;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "[%.2f, %.2f)", lo, lo + 0.25);
  return buf;
}

namespace {

struct Tallies {
  std::int64_t episodes = 0;
  std::int64_t frames = 0;
  std::int64_t with_tool = 0;
  std::int64_t invalid = 0;
};

Tallies tally_range(const std::vector<TrajectoryRecord>& records, std::size_t lo,
                    std::size_t hi) {
  Tallies t;
  for (std::size_t i = lo; i < hi; ++i) {
    const TrajectoryRecord& r = records[i];
    ++t.episodes;
    t.frames += r.frames_consumed;
    if (trajectory_uses_tool(r.trajectory)) ++t.with_tool;
    if (!r.trajectory.format_valid) ++t.invalid;
  }
  return t;
}

StatsReport report_from(const Tallies& t) {
  StatsReport report;
  report.episodes = t.episodes;
  report.total_frames = t.frames;
  if (t.episodes > 0) {
    const double n = static_cast<double>(t.episodes);
    report.mean_frames = static_cast<double>(t.frames) / n;
    report.tool_call_rate = static_cast<double>(t.with_tool) / n;
    report.format_invalid_rate = static_cast<double>(t.invalid) / n;
  }
  return report;
}

}  // namespace

StatsReport collect_stats_serial(const std::vector<TrajectoryRecord>& records) {
  return report_from(tally_range(records, 0, records.size()));
}

StatsReport collect_stats_parallel(const std::vector<TrajectoryRecord>& records, int jobs) {
  const int n = std::max(1, jobs);
  std::vector<Tallies> partial(static_cast<std::size_t>(n));
  const std::size_t chunk = (records.size() + n - 1) / std::max<std::size_t>(1, n);
#ifdef _OPENMP
#pragma omp parallel for num_threads(n)
#endif
  for (int p = 0; p < n; ++p) {
    const std::size_t lo = std::min(records.size(), p * chunk);
    const std::size_t hi = std::min(records.size(), lo + chunk);
    partial[p] = tally_range(records, lo, hi);
  }
  Tallies total;
  for (const Tallies& t : partial) {
    total.episodes += t.episodes;
    total.frames += t.frames;
    total.with_tool += t.with_tool;
    total.invalid += t.invalid;
  }
  return report_from(total);
}

void join_dimensions(StatsReport& report, const std::vector<TrajectoryRecord>& records,
                     const std::vector<QARecord>& qa_records) {
  std::map<std::string, std::string> dim_by_qa;
  for (const QARecord& qa : qa_records) dim_by_qa[qa.qa_id] = to_string(qa.task_dimension);
  for (const TrajectoryRecord& r : records) {
    const auto it = dim_by_qa.find(r.qa_id);
    const std::string key = it == dim_by_qa.end() ? "unknown" : it->second;
    ++report.per_dimension[key];
  }
}

void join_rewards(StatsReport& report, const std::vector<RewardRecord>& rewards) {
  for (const RewardRecord& r : rewards) ++report.reward_histogram[reward_bin_label(r.breakdown.total)];
}

nlohmann::json StatsReport::to_json() const {
  nlohmann::json j{{"episodes", episodes},
                   {"total_frames", total_frames},
                   {"mean_frames", mean_frames},
                   {"tool_call_rate", tool_call_rate},
                   {"format_invalid_rate", format_invalid_rate}};
  if (!per_dimension.empty()) j["per_dimension"] = per_dimension;
  if (!reward_histogram.empty()) j["reward_histogram"] = reward_histogram;
  return j;
}

}  // namespace framerl
