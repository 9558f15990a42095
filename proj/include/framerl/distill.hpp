#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "framerl/environment.hpp"
#include "framerl/judge.hpp"
#include "framerl/records.hpp"

namespace framerl {

// Source rows are flat column -> value maps; adapters are declarative, so no
// per-dataset code exists anywhere in the engine.
struct SourceRecord {
  std::map<std::string, std::string> fields;
};

// Declarative adapter turning one source row into a QARecord. Slots in
// question_template are written {name}; each slot reads the source column of
// the same name unless column_map says otherwise. Multiple-choice templates
// draw n_choices - 1 distractors from vocabulary (truth excluded), seeded by
// seed ^ fnv1a64(qa_id) so output is byte-stable per record regardless of
// processing order.
struct TaskTemplate {
  std::string source_dataset;
  std::string task;
  std::string sport;
  TaskDimension task_dimension = TaskDimension::FineGrainedRecognition;
  AnswerFormat answer_format = AnswerFormat::OpenEnded;
  std::string question_template;
  std::string truth_slot;
  std::vector<std::string> vocabulary;
  int n_choices = 4;
  std::uint64_t seed = 0;
  std::string qa_id_column = "qa_id";
  std::string video_id_column = "video_id";
  std::map<std::string, std::string> column_map;
};

void to_json(nlohmann::json& j, const TaskTemplate& t);
void from_json(const nlohmann::json& j, TaskTemplate& t);

// Deterministic text substitution with slot validation. Throws
// MissingSlotError when a slot (or the id columns) has no source column, and
// InputError when an MCQ vocabulary cannot fill the option list.
QARecord apply_template(const SourceRecord& record, const TaskTemplate& tmpl);

class TemplateRegistry {
 public:
  // Keyed by (source_dataset, task); re-registering a key is an InputError.
  void register_template(TaskTemplate tmpl);
  const TaskTemplate& lookup(const std::string& source_dataset, const std::string& task) const;
  QARecord apply(const std::string& source_dataset, const std::string& task,
                 const SourceRecord& record) const;
  std::size_t size() const { return templates_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, TaskTemplate> templates_;
};

enum class Split { TrainSft, TrainRl, Test };

const char* to_string(Split split);
std::optional<Split> split_from_string(std::string_view name);

struct SplitRatios {
  double sft = 0.18;
  double rl = 0.74;
  double test = 0.08;
};

struct Exclusion {
  std::string video_id;
  std::string reason;
};

// Video-granular partition: every video maps to exactly one split, so all
// QAs of a video co-travel by construction. Videos recorded in exclusions
// are sacrificed entirely: they stay mapped to test but select_records drops
// them from every pool.
struct SplitPlan {
  std::map<std::string, Split> assignment;
  std::vector<Exclusion> exclusions;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

void to_json(nlohmann::json& j, const SplitPlan& plan);
void from_json(const nlohmann::json& j, SplitPlan& plan);

// Seeded deterministic split at video granularity with largest-remainder
// pool sizing. overlap_pairs name dataset pairs known to share underlying
// footage: a video appearing in both sides of a pair and landing in test is
// excluded from the other side's training pools (recorded per pair).
// Throws EmptyInputError on an empty record list and InputError on ratios
// that do not sum to 1.
SplitPlan plan_splits(const std::vector<QARecord>& records, const SplitRatios& ratios,
                      const std::vector<std::pair<std::string, std::string>>& overlap_pairs,
                      std::uint64_t seed);

// QAs of videos assigned to `split`, minus excluded videos. Order follows
// the input record order.
std::vector<QARecord> select_records(const std::vector<QARecord>& records, const SplitPlan& plan,
                                     Split split);

// One teacher episode, judged. retained requires both the format gate and
// the judge threshold; the conversation is the SFT emission (system, user,
// assistant, and tool turns in order).
struct CoTSample {
  std::string qa_id;
  Trajectory trajectory;
  int judge_score = 0;
  bool retained = false;
  std::vector<Message> conversation;
  std::string judge_rationale;
};

void to_json(nlohmann::json& j, const CoTSample& sample);

struct DistillFailure {
  std::string qa_id;
  std::string reason;
  bool transport = false;  // teacher or judge endpoint failure, not bad input
};

// Scores one completed teacher episode 0..100. Implementations must be safe
// to call concurrently.
class CotJudge {
 public:
  virtual ~CotJudge() = default;
  virtual JudgeVerdict judge(const QARecord& qa, const EpisodeRecord& episode) = 0;
};

// Judges the full reasoning trace (all turns, answer included) against the
// reference via a judge endpoint.
class RemoteCotJudge final : public CotJudge {
 public:
  explicit RemoteCotJudge(std::shared_ptr<JudgeClient> client, std::string rubric);
  JudgeVerdict judge(const QARecord& qa, const EpisodeRecord& episode) override;

 private:
  std::shared_ptr<JudgeClient> client_;
  std::string rubric_;
};

using TeacherFactory = std::function<std::unique_ptr<Policy>(const QARecord& qa)>;
using VideoLookup = std::function<VideoHandle(const std::string& video_id)>;

struct DistillConfig {
  int judge_threshold = 80;  // retained needs judge_score >= threshold
  EpisodeConfig episode;
  // Regeneration budget per record when a sample comes back non-retained.
  // Default 1: a single attempt, no resampling.
  int attempts = 1;
  int jobs = 1;  // parallel fan-out across records
};

struct DistillOutcome {
  std::vector<CoTSample> samples;      // record order, one per completed episode
  std::vector<DistillFailure> failures;  // per-record errors; the run continues
};

// Run each QA through the teacher and judge the result. Per-record failures
// (transport, script exhaustion, judge outage, unknown video) are reported,
// never silently scored. Sample order matches record order whatever the job
// count.
DistillOutcome distill_cot(const std::vector<QARecord>& records, const TeacherFactory& teacher_for,
                           const VideoLookup& video_for, CotJudge& judge,
                           const DistillConfig& config);

// Convenience overload: one shared teacher, necessarily serial.
DistillOutcome distill_cot(const std::vector<QARecord>& records, Policy& teacher,
                           const VideoLookup& video_for, CotJudge& judge,
                           const DistillConfig& config);

}  // namespace framerl
