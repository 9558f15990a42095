#include "framerl/batch.hpp"

#include <algorithm>
#include <map>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace framerl {

namespace {

EpisodeOutcome run_one(const EpisodeTask& task, const VideoLookup& video_for,
                       const PolicyFactory& policy_for, const EpisodeConfig& config) {
  EpisodeOutcome outcome;
  try {
    const VideoHandle video = video_for(task.qa.video_id);
    const std::unique_ptr<Policy> policy = policy_for(task.qa, task.rollout);
    if (!policy) throw InputError("policy factory returned null for " + task.qa.qa_id);
    EpisodeRecord episode = run_episode(video, task.qa.question, *policy, config);

    TrajectoryRecord record;
    record.qa_id = task.qa.qa_id;
    record.rollout = task.rollout;
    record.video_id = task.qa.video_id;
    record.trajectory = std::move(episode.trajectory);
    record.frames_consumed = episode.frames_consumed;
    record.answer = std::move(episode.answer);
    outcome.record = std::move(record);
  } catch (const PolicyTransportError& e) {
    outcome.error = e.what();
    outcome.transport = true;
  } catch (const std::exception& e) {
    outcome.error = e.what();
  }
  return outcome;
}

ScoreOutcome score_one(const ScoreTask& task, AnswerScorer& scorer, const RewardConfig& config) {
  ScoreOutcome outcome;
  try {
    const AccuracyScore acc = score_answer(task.trajectory.answer, task.truth, scorer);
    RewardRecord record;
    record.qa_id = task.trajectory.qa_id;
    record.rollout = task.trajectory.rollout;
    record.scorer_id = acc.scorer_id;
    record.breakdown = compute_reward(task.trajectory.trajectory, acc, config);
    record.ratio = task.trajectory.ratio;
    record.kl_to_ref = task.trajectory.kl_to_ref;
    outcome.record = std::move(record);
  } catch (const JudgeUnavailableError& e) {
    outcome.deferred = true;
    outcome.error = e.what();
  } catch (const std::exception& e) {
    outcome.error = e.what();
  }
  return outcome;
}

GroupReport report_for(const std::string& qa_id, const std::vector<const RewardRecord*>& members,
                       const GrpoConfig& config) {
  GroupReport report;
  report.prompt_id = qa_id;
  report.rewards.reserve(members.size());
  for (const RewardRecord* r : members) report.rewards.push_back(r->breakdown.total);

  const AdvantageSet advantages = compute_advantages(report.rewards, config);
  report.advantages = advantages.advantages;
  report.mean_r = advantages.mean_r;
  report.std_r = advantages.std_r;
  report.degenerate = advantages.degenerate;

  double kl_sum = 0.0;
  std::size_t kl_count = 0;
  for (const RewardRecord* r : members)
    if (r->kl_to_ref) {
      kl_sum += *r->kl_to_ref;
      ++kl_count;
    }
  if (kl_count > 0) report.kl = kl_sum / static_cast<double>(kl_count);

  const bool all_ratios =
      std::all_of(members.begin(), members.end(),
                  [](const RewardRecord* r) { return r->ratio.has_value(); });
  if (all_ratios) {
    RolloutGroup group;
    group.prompt_id = qa_id;
    group.rewards = report.rewards;
    for (const RewardRecord* r : members) group.ratios.push_back(*r->ratio);
    group.kl_to_ref = report.kl.value_or(0.0);
    report.objective = objective_value(group, advantages, config);
  }
  return report;
}

struct GroupedRecords {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RewardRecord*>> members;
};

GroupedRecords group_by_prompt(const std::vector<RewardRecord>& records) {
  GroupedRecords grouped;
  for (const RewardRecord& r : records) {
    auto& bucket = grouped.members[r.qa_id];
    if (bucket.empty()) grouped.order.push_back(r.qa_id);
    bucket.push_back(&r);
  }
  return grouped;
}

}  // namespace

std::vector<EpisodeOutcome> run_episodes_serial(const std::vector<EpisodeTask>& tasks,
                                                const VideoLookup& video_for,
                                                const PolicyFactory& policy_for,
                                                const EpisodeConfig& config) {
  std::vector<EpisodeOutcome> out(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i)
    out[i] = run_one(tasks[i], video_for, policy_for, config);
  return out;
}

std::vector<EpisodeOutcome> run_episodes_parallel(const std::vector<EpisodeTask>& tasks,
                                                  const VideoLookup& video_for,
                                                  const PolicyFactory& policy_for,
                                                  const EpisodeConfig& config, int jobs) {
  std::vector<EpisodeOutcome> out(tasks.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs))
#endif
  for (std::size_t i = 0; i < tasks.size(); ++i)
    out[i] = run_one(tasks[i], video_for, policy_for, config);
  return out;
}

std::vector<ScoreOutcome> score_records_serial(const std::vector<ScoreTask>& tasks,
                                               AnswerScorer& scorer, const RewardConfig& config) {
  std::vector<ScoreOutcome> out(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) out[i] = score_one(tasks[i], scorer, config);
  return out;
}

std::vector<ScoreOutcome> score_records_parallel(const std::vector<ScoreTask>& tasks,
                                                 AnswerScorer& scorer, const RewardConfig& config,
                                                 int jobs) {
  std::vector<ScoreOutcome> out(tasks.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs))
#endif
  for (std::size_t i = 0; i < tasks.size(); ++i) out[i] = score_one(tasks[i], scorer, config);
  return out;
}

GroupingOutcome group_reports_serial(const std::vector<RewardRecord>& records,
                                     const GrpoConfig& config) {
  const GroupedRecords grouped = group_by_prompt(records);
  GroupingOutcome outcome;
  for (const std::string& qa_id : grouped.order) {
    try {
      outcome.reports.push_back(report_for(qa_id, grouped.members.at(qa_id), config));
    } catch (const std::exception& e) {
      outcome.errors.push_back("group " + qa_id + ": " + e.what());
    }
  }
  return outcome;
}

GroupingOutcome group_reports_parallel(const std::vector<RewardRecord>& records,
                                       const GrpoConfig& config, int jobs) {
  const GroupedRecords grouped = group_by_prompt(records);
  std::vector<std::optional<GroupReport>> slots(grouped.order.size());
  std::vector<std::optional<std::string>> errors(grouped.order.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs))
#endif
  for (std::size_t i = 0; i < grouped.order.size(); ++i) {
    try {
      slots[i] = report_for(grouped.order[i], grouped.members.at(grouped.order[i]), config);
    } catch (const std::exception& e) {
      errors[i] = "group " + grouped.order[i] + ": " + e.what();
    }
  }
  GroupingOutcome outcome;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) outcome.reports.push_back(std::move(*slots[i]));
    if (errors[i]) outcome.errors.push_back(std::move(*errors[i]));
  }
  return outcome;
}

}  // namespace framerl
