#include "framerl/records.hpp"

#include <utility>

namespace framerl {

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw InputError(std::string("missing field \"") + key + "\"");
  return *it;
}

std::optional<TurnErrorCode> turn_error_code_from_string(const std::string& name) {
  if (name == "MissingThink") return TurnErrorCode::MissingThink;
  if (name == "MissingAction") return TurnErrorCode::MissingAction;
  if (name == "MalformedToolCall") return TurnErrorCode::MalformedToolCall;
  if (name == "MultipleActions") return TurnErrorCode::MultipleActions;
  return std::nullopt;
}

nlohmann::json action_to_json(const Action& action) {
  if (const auto* fe = std::get_if<FrameExtraction>(&action))
    return {{"type", "frame_extraction"},
            {"start", fe->interval.start},
            {"end", fe->interval.end}};
  return {{"type", "output_answer"}, {"text", std::get<OutputAnswer>(action).text}};
}

Action action_from_json(const nlohmann::json& j) {
  const std::string type = require(j, "type").get<std::string>();
  if (type == "frame_extraction")
    return FrameExtraction{FrameInterval{require(j, "start").get<std::int64_t>(),
                                         require(j, "end").get<std::int64_t>()}};
  if (type == "output_answer") return OutputAnswer{require(j, "text").get<std::string>()};
  throw InputError("unknown action type \"" + type + "\"");
}

nlohmann::json step_to_json(const TrajStep& step) {
  nlohmann::json j{{"frame_indices", step.frames.indices()},
                   {"raw", step.raw_text},
                   {"thought", step.thought.text}};
  if (step.action) j["action"] = action_to_json(*step.action);
  if (step.parse_error)
    j["parse_error"] = {{"code", to_string(step.parse_error->code)},
                        {"detail", step.parse_error->detail}};
  return j;
}

TrajStep step_from_json(const nlohmann::json& j) {
  TrajStep step;
  // Payloads are reproducible from the manifest, so only indices round-trip.
  for (const auto& idx : require(j, "frame_indices"))
    step.frames.entries.push_back(FrameEntry{idx.get<std::int64_t>(), FramePayload{}});
  step.raw_text = require(j, "raw").get<std::string>();
  step.thought.text = require(j, "thought").get<std::string>();
  if (j.contains("action") && !j["action"].is_null()) step.action = action_from_json(j["action"]);
  if (j.contains("parse_error") && !j["parse_error"].is_null()) {
    const auto& pe = j["parse_error"];
    const std::string code = require(pe, "code").get<std::string>();
    const auto parsed = turn_error_code_from_string(code);
    if (!parsed) throw InputError("unknown parse error code \"" + code + "\"");
    step.parse_error = TurnError{*parsed, require(pe, "detail").get<std::string>()};
  }
  return step;
}

}  // namespace

nlohmann::json trajectory_to_json(const Trajectory& trajectory) {
  nlohmann::json steps = nlohmann::json::array();
  for (const TrajStep& step : trajectory.steps) steps.push_back(step_to_json(step));
  return {{"format_valid", trajectory.format_valid},
          {"diagnostics", trajectory.diagnostics},
          {"steps", std::move(steps)}};
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
  Trajectory trajectory;
  trajectory.format_valid = require(j, "format_valid").get<bool>();
  if (j.contains("diagnostics"))
    trajectory.diagnostics = j["diagnostics"].get<std::vector<std::string>>();
  for (const auto& step : require(j, "steps")) trajectory.steps.push_back(step_from_json(step));
  return trajectory;
}

nlohmann::json conversation_to_json(const std::vector<Message>& conversation) {
  nlohmann::json out = nlohmann::json::array();
  for (const Message& msg : conversation) {
    nlohmann::json parts = nlohmann::json::array();
    for (const MessagePart& part : msg.parts) {
      if (part.kind == MessagePart::Kind::Text)
        parts.push_back({{"type", "text"}, {"text", part.text}});
      else
        parts.push_back({{"type", "frame"}, {"frame_index", part.frame_index}});
    }
    out.push_back({{"role", msg.role}, {"parts", std::move(parts)}});
  }
  return out;
}

const char* to_string(TaskDimension dimension) {
  switch (dimension) {
    case TaskDimension::FineGrainedRecognition: return "fine_grained_recognition";
    case TaskDimension::RuleProcedural: return "rule_procedural";
    case TaskDimension::AssessmentCoaching: return "assessment_coaching";
    case TaskDimension::LiveCommentary: return "live_commentary";
  }
  return "unknown";
}

std::optional<TaskDimension> task_dimension_from_string(std::string_view name) {
  if (name == "fine_grained_recognition") return TaskDimension::FineGrainedRecognition;
  if (name == "rule_procedural") return TaskDimension::RuleProcedural;
  if (name == "assessment_coaching") return TaskDimension::AssessmentCoaching;
  if (name == "live_commentary") return TaskDimension::LiveCommentary;
  return std::nullopt;
}

const char* to_string(AnswerFormat format) {
  return format == AnswerFormat::MultipleChoice ? "multiple_choice" : "open_ended";
}

std::optional<AnswerFormat> answer_format_from_string(std::string_view name) {
  if (name == "multiple_choice") return AnswerFormat::MultipleChoice;
  if (name == "open_ended") return AnswerFormat::OpenEnded;
  return std::nullopt;
}

void to_json(nlohmann::json& j, const QARecord& r) {
  j = nlohmann::json{{"qa_id", r.qa_id},
                     {"video_id", r.video_id},
                     {"source_dataset", r.source_dataset},
                     {"sport", r.sport},
                     {"task_dimension", to_string(r.task_dimension)},
                     {"question", r.question},
                     {"ground_truth", r.ground_truth},
                     {"answer_format", to_string(r.answer_format)}};
}

void from_json(const nlohmann::json& j, QARecord& r) {
  r = QARecord{};
  r.qa_id = require(j, "qa_id").get<std::string>();
  r.video_id = require(j, "video_id").get<std::string>();
  r.source_dataset = require(j, "source_dataset").get<std::string>();
  r.sport = require(j, "sport").get<std::string>();
  const std::string dimension = require(j, "task_dimension").get<std::string>();
  const auto parsed_dimension = task_dimension_from_string(dimension);
  if (!parsed_dimension)
    throw InputError("task_dimension \"" + dimension + "\" is not in the four-dimension taxonomy");
  r.task_dimension = *parsed_dimension;
  r.question = require(j, "question").get<std::string>();
  r.ground_truth = require(j, "ground_truth").get<std::string>();
  const std::string format = require(j, "answer_format").get<std::string>();
  const auto parsed_format = answer_format_from_string(format);
  if (!parsed_format) throw InputError("unknown answer_format \"" + format + "\"");
  r.answer_format = *parsed_format;
}

void to_json(nlohmann::json& j, const TrajectoryRecord& r) {
  j = trajectory_to_json(r.trajectory);
  j["schema_version"] = kSchemaVersion;
  j["qa_id"] = r.qa_id;
  j["rollout"] = r.rollout;
  j["video_id"] = r.video_id;
  j["frames_consumed"] = r.frames_consumed;
  if (r.answer) j["answer"] = *r.answer;
  if (r.ratio) j["ratio"] = *r.ratio;
  if (r.kl_to_ref) j["kl_to_ref"] = *r.kl_to_ref;
}

void from_json(const nlohmann::json& j, TrajectoryRecord& r) {
  r = TrajectoryRecord{};
  r.qa_id = require(j, "qa_id").get<std::string>();
  r.rollout = require(j, "rollout").get<int>();
  r.video_id = require(j, "video_id").get<std::string>();
  r.frames_consumed = require(j, "frames_consumed").get<std::int64_t>();
  r.trajectory = trajectory_from_json(j);
  if (j.contains("answer") && !j["answer"].is_null()) r.answer = j["answer"].get<std::string>();
  if (j.contains("ratio") && !j["ratio"].is_null()) r.ratio = j["ratio"].get<double>();
  if (j.contains("kl_to_ref") && !j["kl_to_ref"].is_null())
    r.kl_to_ref = j["kl_to_ref"].get<double>();
}

void to_json(nlohmann::json& j, const RewardRecord& r) {
  j = nlohmann::json{{"schema_version", kSchemaVersion},
                     {"qa_id", r.qa_id},
                     {"rollout", r.rollout},
                     {"scorer_id", r.scorer_id},
                     {"acc", r.breakdown.acc},
                     {"g_tool", r.breakdown.g_tool},
                     {"g_acc", r.breakdown.g_acc},
                     {"g_fmt", r.breakdown.g_fmt},
                     {"r_tool", r.breakdown.r_tool},
                     {"p_format", r.breakdown.p_format},
                     {"total", r.breakdown.total}};
  if (r.ratio) j["ratio"] = *r.ratio;
  if (r.kl_to_ref) j["kl_to_ref"] = *r.kl_to_ref;
}

void from_json(const nlohmann::json& j, RewardRecord& r) {
  r = RewardRecord{};
  r.qa_id = require(j, "qa_id").get<std::string>();
  r.rollout = require(j, "rollout").get<int>();
  r.scorer_id = require(j, "scorer_id").get<std::string>();
  r.breakdown.acc = require(j, "acc").get<double>();
  r.breakdown.g_tool = require(j, "g_tool").get<bool>();
  r.breakdown.g_acc = require(j, "g_acc").get<bool>();
  r.breakdown.g_fmt = require(j, "g_fmt").get<bool>();
  r.breakdown.r_tool = require(j, "r_tool").get<double>();
  r.breakdown.p_format = require(j, "p_format").get<double>();
  r.breakdown.total = require(j, "total").get<double>();
  if (j.contains("ratio") && !j["ratio"].is_null()) r.ratio = j["ratio"].get<double>();
  if (j.contains("kl_to_ref") && !j["kl_to_ref"].is_null())
    r.kl_to_ref = j["kl_to_ref"].get<double>();
}

void to_json(nlohmann::json& j, const GroupReport& r) {
  j = nlohmann::json{{"schema_version", kSchemaVersion},
                     {"prompt_id", r.prompt_id},
                     {"rewards", r.rewards},
                     {"advantages", r.advantages},
                     {"mean", r.mean_r},
                     {"std", r.std_r},
                     {"degenerate", r.degenerate}};
  // Absent means absent: no ratios were supplied, so no objective exists.
  if (r.objective) j["objective"] = *r.objective;
  if (r.kl) j["kl"] = *r.kl;
}

void from_json(const nlohmann::json& j, GroupReport& r) {
  r = GroupReport{};
  r.prompt_id = require(j, "prompt_id").get<std::string>();
  r.rewards = require(j, "rewards").get<std::vector<double>>();
  r.advantages = require(j, "advantages").get<std::vector<double>>();
  r.mean_r = require(j, "mean").get<double>();
  r.std_r = require(j, "std").get<double>();
  r.degenerate = require(j, "degenerate").get<bool>();
  if (j.contains("objective") && !j["objective"].is_null())
    r.objective = j["objective"].get<double>();
  if (j.contains("kl") && !j["kl"].is_null()) r.kl = j["kl"].get<double>();
}

void to_json(nlohmann::json& j, const VideoManifestEntry& r) {
  j = nlohmann::json{{"video_id", r.video_id}, {"frame_count", r.frame_count}};
  if (r.uri) j["uri"] = *r.uri;
}

void from_json(const nlohmann::json& j, VideoManifestEntry& r) {
  r = VideoManifestEntry{};
  r.video_id = require(j, "video_id").get<std::string>();
  r.frame_count = require(j, "frame_count").get<std::int64_t>();
  if (r.frame_count < 1) throw InputError("frame_count must be >= 1");
  if (j.contains("uri") && !j["uri"].is_null()) r.uri = j["uri"].get<std::string>();
}

void to_json(nlohmann::json& j, const ScriptEntry& r) {
  j = nlohmann::json{{"qa_id", r.qa_id}, {"turns", r.turns}};
  if (r.rollout >= 0) j["rollout"] = r.rollout;
}

void from_json(const nlohmann::json& j, ScriptEntry& r) {
  r = ScriptEntry{};
  r.qa_id = require(j, "qa_id").get<std::string>();
  r.turns = require(j, "turns").get<std::vector<std::string>>();
  if (j.contains("rollout") && !j["rollout"].is_null()) r.rollout = j["rollout"].get<int>();
}

VideoHandle video_from_manifest(const VideoManifestEntry& entry) {
  if (entry.uri) return make_uri_video(entry.video_id, entry.frame_count, *entry.uri);
  return make_stub_video(entry.video_id, entry.frame_count);
}

std::unique_ptr<Policy> replay_policy(const TrajectoryRecord& record) {
  std::vector<std::string> turns;
  turns.reserve(record.trajectory.steps.size());
  for (const TrajStep& step : record.trajectory.steps) turns.push_back(step.raw_text);
  return scripted_policy(std::move(turns));
}

nlohmann::json parse_jsonl_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) throw InputError("line is not valid JSON");
  if (!j.is_object()) throw InputError("line is not a JSON object");
  return j;
}

JsonlWriter::JsonlWriter(const std::string& path) : path_(path), out_(path) {
  if (!out_) throw InputError("cannot open " + path + " for writing");
}

void JsonlWriter::write_json(const nlohmann::json& j) {
  out_ << j.dump() << '\n';
  if (!out_) throw InputError("write to " + path_ + " failed");
  ++lines_;
}

void JsonlWriter::flush() { out_.flush(); }

}  // namespace framerl
