#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "framerl/environment.hpp"
#include "framerl/grpo.hpp"
#include "framerl/records.hpp"
#include "framerl/reward.hpp"

namespace framerl {

// Batch lanes come in pairs: a serial reference and an OpenMP version that
// must produce identical results. The parallel versions fall back to the
// serial path when built without OpenMP. Outputs are slotted by task index,
// and every cross-task aggregate is integral, so scheduling order can never
// leak into results.

using PolicyFactory = std::function<std::unique_ptr<Policy>(const QARecord& qa, int rollout)>;
using VideoLookup = std::function<VideoHandle(const std::string& video_id)>;

struct EpisodeTask {
  QARecord qa;
  int rollout = 0;
};

struct EpisodeOutcome {
  std::optional<TrajectoryRecord> record;
  std::optional<std::string> error;  // transport or script failure, task skipped
  bool transport = false;            // error came from the endpoint, not the input
};

std::vector<EpisodeOutcome> run_episodes_serial(const std::vector<EpisodeTask>& tasks,
                                                const VideoLookup& video_for,
                                                const PolicyFactory& policy_for,
                                                const EpisodeConfig& config);
std::vector<EpisodeOutcome> run_episodes_parallel(const std::vector<EpisodeTask>& tasks,
                                                  const VideoLookup& video_for,
                                                  const PolicyFactory& policy_for,
                                                  const EpisodeConfig& config, int jobs);

struct ScoreTask {
  TrajectoryRecord trajectory;
  GroundTruth truth;
};

struct ScoreOutcome {
  std::optional<RewardRecord> record;
  std::optional<std::string> error;
  // Judge outage: the episode's reward is deferred, never defaulted to 0.
  bool deferred = false;
};

std::vector<ScoreOutcome> score_records_serial(const std::vector<ScoreTask>& tasks,
                                               AnswerScorer& scorer, const RewardConfig& config);
std::vector<ScoreOutcome> score_records_parallel(const std::vector<ScoreTask>& tasks,
                                                 AnswerScorer& scorer, const RewardConfig& config,
                                                 int jobs);

struct GroupingOutcome {
  std::vector<GroupReport> reports;  // group order = first appearance of qa_id
  std::vector<std::string> errors;   // undersized groups and the like
};

// Groups reward records by qa_id (members keep input order). objective is
// emitted only when every member carries a ratio; kl is the mean of the
// members' kl_to_ref values when any are present.
GroupingOutcome group_reports_serial(const std::vector<RewardRecord>& records,
                                     const GrpoConfig& config);
GroupingOutcome group_reports_parallel(const std::vector<RewardRecord>& records,
                                       const GrpoConfig& config, int jobs);

}  // namespace framerl
