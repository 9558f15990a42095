// Times each serial/parallel lane pair on a synthetic workload and checks
// the two outputs are identical. Speedup numbers are informational; the
// identical column is a hard requirement and failing it exits nonzero.

#include <chrono>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "framerl/batch.hpp"
#include "framerl/environment.hpp"
#include "framerl/policy.hpp"
#include "framerl/protocol.hpp"
#include "framerl/records.hpp"
#include "framerl/reward.hpp"
#include "framerl/rng.hpp"
#include "framerl/stats.hpp"

using namespace framerl;
using nlohmann::json;

namespace {

constexpr int kReps = 3;  // best-of-N to damp scheduler noise

template <typename Fn>
double best_ms(Fn&& fn) {
  double best = 1e18;
  for (int rep = 0; rep < kReps; ++rep) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    if (ms < best) best = ms;
  }
  return best;
}

struct Row {
  const char* lane;
  std::size_t tasks;
  double serial_ms;
  double parallel_ms;
  bool identical;
};

json probe(const std::vector<EpisodeOutcome>& outcomes) {
  json out = json::array();
  for (const EpisodeOutcome& o : outcomes) {
    json j;
    j["record"] = o.record ? json(*o.record) : json();
    j["error"] = o.error ? json(*o.error) : json();
    j["transport"] = o.transport;
    out.push_back(std::move(j));
  }
  return out;
}

json probe(const std::vector<ScoreOutcome>& outcomes) {
  json out = json::array();
  for (const ScoreOutcome& o : outcomes) {
    json j;
    j["record"] = o.record ? json(*o.record) : json();
    j["error"] = o.error ? json(*o.error) : json();
    j["deferred"] = o.deferred;
    out.push_back(std::move(j));
  }
  return out;
}

json probe(const GroupingOutcome& outcome) {
  json out;
  out["reports"] = outcome.reports;
  out["errors"] = outcome.errors;
  return out;
}

Row bench_episodes(int jobs) {
  std::vector<EpisodeTask> tasks;
  for (int i = 0; i < 10000; ++i) {
    EpisodeTask task;
    task.qa.qa_id = "q" + std::to_string(i);
    task.qa.video_id = "v";
    task.qa.question = "Who scored?";
    task.qa.ground_truth = "B";
    task.rollout = i % 4;
    tasks.push_back(std::move(task));
  }
  VideoLookup video_for = [](const std::string& id) { return make_stub_video(id, 240); };
  PolicyFactory policy_for = [](const QARecord&, int rollout) {
    std::vector<std::string> turns;
    for (int t = 0; t < rollout; ++t)
      turns.push_back(serialize_turn(Thought{"look"}, FrameExtraction{{20 * t, 20 * t + 30}}));
    turns.push_back(serialize_turn(Thought{"done"}, OutputAnswer{"b)"}));
    return scripted_policy(std::move(turns));
  };
  const EpisodeConfig config;

  std::vector<EpisodeOutcome> serial, parallel;
  const double serial_ms =
      best_ms([&] { serial = run_episodes_serial(tasks, video_for, policy_for, config); });
  const double parallel_ms = best_ms(
      [&] { parallel = run_episodes_parallel(tasks, video_for, policy_for, config, jobs); });
  return {"episodes", tasks.size(), serial_ms, parallel_ms, probe(serial) == probe(parallel)};
}

Row bench_scoring(int jobs) {
  auto tool_policy = scripted_policy({serialize_turn(Thought{"look"}, FrameExtraction{{30, 70}}),
                                      serialize_turn(Thought{"done"}, OutputAnswer{"b)"})});
  const EpisodeRecord episode = run_episode(make_stub_video("v", 240), "Who scored?", *tool_policy, {});

  std::vector<ScoreTask> tasks;
  tasks.reserve(200000);
  for (int i = 0; i < 200000; ++i) {
    ScoreTask task;
    task.trajectory.qa_id = "q" + std::to_string(i);
    task.trajectory.video_id = "v";
    task.trajectory.trajectory = episode.trajectory;
    task.trajectory.frames_consumed = episode.frames_consumed;
    task.trajectory.answer = (i % 3 == 0) ? "c)" : "b)";
    task.truth = {"B", "Who scored?"};
    tasks.push_back(std::move(task));
  }
  ExactMatchScorer scorer;
  const RewardConfig config;

  std::vector<ScoreOutcome> serial, parallel;
  const double serial_ms = best_ms([&] { serial = score_records_serial(tasks, scorer, config); });
  const double parallel_ms =
      best_ms([&] { parallel = score_records_parallel(tasks, scorer, config, jobs); });
  return {"scoring", tasks.size(), serial_ms, parallel_ms, probe(serial) == probe(parallel)};
}

Row bench_grouping(int jobs) {
  SplitMix64 rng(0xBE5466CF34E90C6CULL);
  std::vector<RewardRecord> records;
  records.reserve(400000);
  for (int i = 0; i < 400000; ++i) {
    RewardRecord record;
    record.qa_id = "g" + std::to_string(i / 8);
    record.rollout = i % 8;
    record.scorer_id = "exact";
    const Gates gates{.g_tool = true, .g_acc = true, .g_fmt = true};
    record.breakdown = compose_reward(gates, rng.uniform(), {});
    record.ratio = 0.9 + 0.2 * rng.uniform();
    record.kl_to_ref = 0.05 * rng.uniform();
    records.push_back(std::move(record));
  }
  const GrpoConfig config;

  GroupingOutcome serial, parallel;
  const double serial_ms = best_ms([&] { serial = group_reports_serial(records, config); });
  const double parallel_ms =
      best_ms([&] { parallel = group_reports_parallel(records, config, jobs); });
  return {"grouping", records.size(), serial_ms, parallel_ms, probe(serial) == probe(parallel)};
}

Row bench_stats(int jobs) {
  SplitMix64 rng(0xC0AC29B7C97C50DDULL);
  std::vector<TrajectoryRecord> records;
  records.reserve(300000);
  for (int i = 0; i < 300000; ++i) {
    TrajectoryRecord record;
    record.qa_id = "q" + std::to_string(i);
    record.video_id = "v";
    const int steps = 1 + static_cast<int>(rng.bounded(4));
    for (int s = 0; s < steps; ++s) {
      TrajStep step;
      step.thought = Thought{"t"};
      if (s + 1 == steps)
        step.action = OutputAnswer{"b)"};
      else
        step.action = FrameExtraction{{10 * s, 10 * s + 5}};
      const int n_frames = static_cast<int>(rng.bounded(6));
      for (int f = 0; f < n_frames; ++f)
        step.frames.entries.push_back({f, {PayloadKind::Stub, "frame_" + std::to_string(f)}});
      record.trajectory.steps.push_back(std::move(step));
    }
    validate_trajectory(record.trajectory, 10);
    record.frames_consumed = 8;
    record.answer = "b)";
    records.push_back(std::move(record));
  }

  StatsReport serial, parallel;
  const double serial_ms = best_ms([&] { serial = collect_stats_serial(records); });
  const double parallel_ms = best_ms([&] { parallel = collect_stats_parallel(records, jobs); });
  return {"stats", records.size(), serial_ms, parallel_ms, serial.to_json() == parallel.to_json()};
}

}  // namespace

int main() {
  const int jobs = std::max(1u, std::thread::hardware_concurrency());
#ifdef _OPENMP
  const char* omp = "on";
#else
  const char* omp = "off (parallel lanes fall back to serial)";
#endif
  std::printf("framerl bench: serial vs parallel lanes (jobs=%d, OpenMP %s)\n\n", jobs, omp);
  std::printf("%-10s %8s %11s %13s %9s %10s\n", "lane", "tasks", "serial_ms", "parallel_ms",
              "speedup", "identical");

  const Row rows[] = {bench_episodes(jobs), bench_scoring(jobs), bench_grouping(jobs),
                      bench_stats(jobs)};
  bool all_identical = true;
  for (const Row& row : rows) {
    std::printf("%-10s %8zu %11.2f %13.2f %8.2fx %10s\n", row.lane, row.tasks, row.serial_ms,
                row.parallel_ms, row.serial_ms / row.parallel_ms,
                row.identical ? "yes" : "NO");
    all_identical = all_identical && row.identical;
  }
  if (!all_identical) {
    std::fprintf(stderr, "parallel lane diverged from its serial reference\n");
    return 1;
  }
  return 0;
}
