#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "framerl/environment.hpp"
#include "framerl/errors.hpp"
#include "framerl/policy.hpp"
#include "framerl/protocol.hpp"
#include "framerl/reward.hpp"

namespace framerl {

// Stamped on every record this engine writes. Bump on any breaking change to
// the shapes in docs/formats.md.
inline constexpr int kSchemaVersion = 1;

// The four-dimension task taxonomy every QA record is tagged with.
enum class TaskDimension {
  FineGrainedRecognition,
  RuleProcedural,
  AssessmentCoaching,
  LiveCommentary,
};

const char* to_string(TaskDimension dimension);
std::optional<TaskDimension> task_dimension_from_string(std::string_view name);

enum class AnswerFormat { MultipleChoice, OpenEnded };

const char* to_string(AnswerFormat format);
std::optional<AnswerFormat> answer_format_from_string(std::string_view name);

// One question with its reference answer.
struct QARecord {
  std::string qa_id;
  std::string video_id;
  std::string source_dataset;
  std::string sport;
  TaskDimension task_dimension = TaskDimension::FineGrainedRecognition;
  std::string question;
  std::string ground_truth;
  AnswerFormat answer_format = AnswerFormat::OpenEnded;
};

// One rollout of one question: the parsed trajectory plus the accounting the
// scorers and reports need. ratio and kl_to_ref are supplied by the training
// harness that produced the rollout; they are absent for scripted runs.
struct TrajectoryRecord {
  std::string qa_id;
  int rollout = 0;
  std::string video_id;
  Trajectory trajectory;
  std::int64_t frames_consumed = 0;
  std::optional<std::string> answer;
  std::optional<double> ratio;
  std::optional<double> kl_to_ref;
};

// Flattened reward breakdown for one rollout. ratio/kl_to_ref are carried
// through from the trajectory so group reports can be built from this file
// alone.
struct RewardRecord {
  std::string qa_id;
  int rollout = 0;
  std::string scorer_id;
  RewardBreakdown breakdown;
  std::optional<double> ratio;
  std::optional<double> kl_to_ref;
};

// Per-group normalization report. objective is present only when every
// member carried a ratio; kl only when at least one member carried kl_to_ref
// (the mean of those present).
struct GroupReport {
  std::string prompt_id;
  std::vector<double> rewards;
  std::vector<double> advantages;
  double mean_r = 0.0;
  double std_r = 0.0;
  bool degenerate = false;
  std::optional<double> objective;
  std::optional<double> kl;
};

// Manifest line describing one video. Without a uri the video is served as
// deterministic stub frames.
struct VideoManifestEntry {
  std::string video_id;
  std::int64_t frame_count = 0;
  std::optional<std::string> uri;
};

// Scripted turns for one rollout. rollout -1 means the entry applies to any
// rollout of the qa_id that has no closer match.
struct ScriptEntry {
  std::string qa_id;
  int rollout = -1;
  std::vector<std::string> turns;
};

// Steps serialize as {frame_indices, raw, thought, action?, parse_error?};
// payloads do not round-trip, only indices do.
nlohmann::json trajectory_to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const nlohmann::json& j);

// Chat turns as {role, parts: [{type: "text", text} | {type: "frame",
// frame_index}]}, the shape of SFT emissions.
nlohmann::json conversation_to_json(const std::vector<Message>& conversation);

void to_json(nlohmann::json& j, const QARecord& r);
void from_json(const nlohmann::json& j, QARecord& r);
void to_json(nlohmann::json& j, const TrajectoryRecord& r);
void from_json(const nlohmann::json& j, TrajectoryRecord& r);
void to_json(nlohmann::json& j, const RewardRecord& r);
void from_json(const nlohmann::json& j, RewardRecord& r);
void to_json(nlohmann::json& j, const GroupReport& r);
void from_json(const nlohmann::json& j, GroupReport& r);
void to_json(nlohmann::json& j, const VideoManifestEntry& r);
void from_json(const nlohmann::json& j, VideoManifestEntry& r);
void to_json(nlohmann::json& j, const ScriptEntry& r);
void from_json(const nlohmann::json& j, ScriptEntry& r);

VideoHandle video_from_manifest(const VideoManifestEntry& entry);

// Replays the raw turn texts of a logged trajectory, observation-blind.
std::unique_ptr<Policy> replay_policy(const TrajectoryRecord& record);

struct JsonlError {
  std::size_t line_number = 0;  // 1-based
  std::string message;
};

template <typename T>
struct JsonlResult {
  std::vector<T> records;
  std::vector<JsonlError> errors;
};

nlohmann::json parse_jsonl_line(const std::string& line);  // throws InputError

// Tolerant reader: every bad line becomes a JsonlError, good lines survive.
// Throws InputError only when the file cannot be opened.
template <typename T>
JsonlResult<T> read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  JsonlResult<T> result;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      result.records.push_back(parse_jsonl_line(line).get<T>());
    } catch (const std::exception& e) {
      result.errors.push_back(JsonlError{line_number, e.what()});
    }
  }
  return result;
}

// Incremental writer so long jobs flush whatever completed before a failure.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path);

  template <typename T>
  void write(const T& record) {
    write_json(nlohmann::json(record));
  }
  void write_json(const nlohmann::json& j);
  void flush();
  std::size_t lines_written() const { return lines_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t lines_ = 0;
};

template <typename T>
void write_jsonl_file(const std::string& path, const std::vector<T>& records) {
  JsonlWriter writer(path);
  for (const T& r : records) writer.write(r);
  writer.flush();
}

}  // namespace framerl
