#include "framerl/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "framerl/batch.hpp"
#include "framerl/distill.hpp"
#include "framerl/environment.hpp"
#include "framerl/errors.hpp"
#include "framerl/judge.hpp"
#include "framerl/prompts.hpp"
#include "framerl/records.hpp"
#include "framerl/remote_policy.hpp"
#include "framerl/rng.hpp"
#include "framerl/stats.hpp"

namespace framerl {

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void report_line_errors(std::ostream& err, const std::string& path,
                        const std::vector<JsonlError>& errors) {
  for (const JsonlError& e : errors)
    err << path << ":" << e.line_number << ": " << e.message << "\n";
}

nlohmann::json errors_to_json(const std::vector<JsonlError>& errors) {
  auto arr = nlohmann::json::array();
  for (const JsonlError& e : errors)
    arr.push_back({{"line", e.line_number}, {"error", e.message}});
  return arr;
}

// Sidecar provenance next to every written report. Deliberately free of
// wall-clock fields: identical inputs must produce identical bytes.
void write_meta(const std::string& out_path, const nlohmann::json& meta) {
  const std::string path = out_path + ".meta.json";
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path);
  out << meta.dump(2) << "\n";
  if (!out) throw InputError("write failed: " + path);
}

std::string env_or_empty(const char* name) {
  const char* value = std::getenv(name);
  return value ? value : "";
}

// Flags shared by the commands that drive a policy (rollout, distill cot).
struct PolicySource {
  std::string script_path;
  std::string endpoint;
  std::string model;
  int max_retries = 3;
  double temperature = 1.0;
  double top_p = 1.0;
  int max_tokens = 2048;
  bool logprobs = false;
};

void add_policy_flags(CLI::App* cmd, PolicySource& src, bool with_logprobs) {
  cmd->add_option("--script", src.script_path,
                  "scripted turns, JSONL of {qa_id, rollout, turns}")
      ->check(CLI::ExistingFile);
  cmd->add_option("--endpoint", src.endpoint, "chat-completions base URL (plain http)")
      ->envname("FRAMERL_ENDPOINT");
  cmd->add_option("--model", src.model, "model id sent to the endpoint")
      ->envname("FRAMERL_MODEL");
  cmd->add_option("--max-retries", src.max_retries, "request retries beyond the first attempt");
  cmd->add_option("--temperature", src.temperature, "sampling temperature");
  cmd->add_option("--top-p", src.top_p, "nucleus sampling cutoff");
  cmd->add_option("--max-tokens", src.max_tokens, "completion token cap");
  if (with_logprobs) cmd->add_flag("--logprobs", src.logprobs, "request per-token logprobs");
}

struct EpisodeFlags {
  EpisodeConfig config;
  std::string system_prompt_file;
};

void add_episode_flags(CLI::App* cmd, EpisodeFlags& flags) {
  cmd->add_option("--k-initial", flags.config.k_initial,
                  "frames in the initial uniform context");
  cmd->add_option("--k-per-call", flags.config.k_per_call, "frames per extraction call");
  cmd->add_option("--max-tool-calls", flags.config.max_tool_calls, "tool budget per episode");
  cmd->add_option("--system-prompt-file", flags.system_prompt_file,
                  "override the built-in system prompt")
      ->check(CLI::ExistingFile);
}

EpisodeConfig resolve_episode(const EpisodeFlags& flags) {
  EpisodeConfig config = flags.config;
  if (!flags.system_prompt_file.empty())
    config.system_prompt = read_text_file(flags.system_prompt_file);
  return config;
}

nlohmann::json episode_meta(const EpisodeConfig& config, const std::string& prompt_file) {
  return {{"k_initial", config.k_initial},
          {"k_per_call", config.k_per_call},
          {"max_tool_calls", config.max_tool_calls},
          {"system_prompt", prompt_file.empty() ? std::string(kSystemPromptVersion) : prompt_file}};
}

// Script entries resolve by (qa_id, rollout) first, then the qa_id wildcard.
class ScriptBook {
 public:
  explicit ScriptBook(const std::vector<ScriptEntry>& entries) {
    for (const ScriptEntry& e : entries) {
      if (e.rollout < 0)
        wildcard_[e.qa_id] = e.turns;
      else
        exact_[{e.qa_id, e.rollout}] = e.turns;
    }
  }

  const std::vector<std::string>& turns_for(const std::string& qa_id, int rollout) const {
    const auto it = exact_.find({qa_id, rollout});
    if (it != exact_.end()) return it->second;
    const auto w = wildcard_.find(qa_id);
    if (w != wildcard_.end()) return w->second;
    throw InputError("no script entry for qa \"" + qa_id + "\" rollout " +
                     std::to_string(rollout));
  }

 private:
  std::map<std::pair<std::string, int>, std::vector<std::string>> exact_;
  std::map<std::string, std::vector<std::string>> wildcard_;
};

struct PolicySetup {
  PolicyFactory factory;
  nlohmann::json describe;
};

// Exactly one of --script / --endpoint. Remote policies share one transport;
// per-rollout decoding seeds derive from the invocation seed and the task id
// so a group is not eight identical samples.
PolicySetup make_policy_setup(const PolicySource& src, std::optional<std::uint64_t> seed) {
  const bool scripted = !src.script_path.empty();
  const bool remote = !src.endpoint.empty();
  if (scripted == remote) throw InputError("choose exactly one of --script or --endpoint");

  PolicySetup setup;
  if (scripted) {
    auto entries = read_jsonl_file<ScriptEntry>(src.script_path);
    if (!entries.errors.empty())
      throw InputError(src.script_path + ": unreadable script line " +
                       std::to_string(entries.errors.front().line_number) + ": " +
                       entries.errors.front().message);
    auto book = std::make_shared<ScriptBook>(entries.records);
    setup.factory = [book](const QARecord& qa, int rollout) {
      return scripted_policy(book->turns_for(qa.qa_id, rollout));
    };
    setup.describe = {{"mode", "scripted"}, {"script", src.script_path}};
    return setup;
  }

  if (src.model.empty()) throw InputError("endpoint mode needs --model or FRAMERL_MODEL");
  HttpOptions http;
  http.base_url = src.endpoint;
  http.api_key = env_or_empty("FRAMERL_API_KEY");
  std::shared_ptr<ChatTransport> transport = make_http_transport(http);

  RemotePolicyConfig base;
  base.model_id = src.model;
  base.decoding.temperature = src.temperature;
  base.decoding.top_p = src.top_p;
  base.decoding.max_tokens = src.max_tokens;
  base.retry.max_retries = src.max_retries;
  base.request_logprobs = src.logprobs;

  setup.factory = [transport, base, seed](const QARecord& qa, int rollout) {
    RemotePolicyConfig config = base;
    if (seed)
      config.decoding.seed = *seed ^ fnv1a64(qa.qa_id + "#" + std::to_string(rollout));
    return std::make_unique<RemotePolicy>(transport, std::move(config));
  };
  setup.describe = {{"mode", "endpoint"},     {"endpoint", src.endpoint},
                    {"model", src.model},     {"temperature", src.temperature},
                    {"top_p", src.top_p},     {"max_tokens", src.max_tokens},
                    {"max_retries", src.max_retries}, {"logprobs", src.logprobs}};
  return setup;
}

std::shared_ptr<JudgeClient> make_judge_client(const std::string& endpoint,
                                               const std::string& model, int max_retries) {
  HttpOptions http;
  http.base_url = endpoint;
  http.api_key = env_or_empty("FRAMERL_JUDGE_API_KEY");
  if (http.api_key.empty()) http.api_key = env_or_empty("FRAMERL_API_KEY");
  JudgeConfig config;
  config.model_id = model;
  config.retry.max_retries = max_retries;
  return std::make_shared<JudgeClient>(make_http_transport(http), config);
}

// ---- rollout ----

struct RolloutOpts {
  std::string qa_path, videos_path, out_path;
  PolicySource policy;
  EpisodeFlags episode;
  int group_size = 1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
};

int run_rollout(const RolloutOpts& opt, std::ostream& out, std::ostream& err) {
  auto qa = read_jsonl_file<QARecord>(opt.qa_path);
  report_line_errors(err, opt.qa_path, qa.errors);
  auto manifest = read_jsonl_file<VideoManifestEntry>(opt.videos_path);
  report_line_errors(err, opt.videos_path, manifest.errors);

  std::map<std::string, VideoHandle> videos;
  for (const VideoManifestEntry& e : manifest.records) videos[e.video_id] = video_from_manifest(e);
  VideoLookup video_for = [&videos](const std::string& video_id) -> VideoHandle {
    const auto it = videos.find(video_id);
    if (it == videos.end()) throw InputError("video \"" + video_id + "\" is not in the manifest");
    return it->second;
  };

  std::optional<std::uint64_t> seed;
  if (opt.seed_set) seed = opt.seed;
  const PolicySetup setup = make_policy_setup(opt.policy, seed);
  const EpisodeConfig episode = resolve_episode(opt.episode);

  std::vector<EpisodeTask> tasks;
  tasks.reserve(qa.records.size() * static_cast<std::size_t>(opt.group_size));
  for (const QARecord& record : qa.records)
    for (int r = 0; r < opt.group_size; ++r) tasks.push_back({record, r});

  const std::vector<EpisodeOutcome> outcomes =
      opt.jobs > 1 ? run_episodes_parallel(tasks, video_for, setup.factory, episode, opt.jobs)
                   : run_episodes_serial(tasks, video_for, setup.factory, episode);

  JsonlWriter writer(opt.out_path);
  auto task_errors = nlohmann::json::array();
  bool transport_failed = false;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const EpisodeOutcome& o = outcomes[i];
    if (o.record) {
      writer.write(*o.record);
      continue;
    }
    ++failed;
    transport_failed = transport_failed || o.transport;
    err << "qa " << tasks[i].qa.qa_id << " rollout " << tasks[i].rollout << ": " << *o.error
        << "\n";
    task_errors.push_back({{"qa_id", tasks[i].qa.qa_id},
                           {"rollout", tasks[i].rollout},
                           {"error", *o.error},
                           {"transport", o.transport}});
  }
  writer.flush();

  nlohmann::json meta{
      {"schema_version", kSchemaVersion},
      {"command", "rollout"},
      {"policy", setup.describe},
      {"episode", episode_meta(episode, opt.episode.system_prompt_file)},
      {"seed", opt.seed_set ? nlohmann::json(opt.seed) : nlohmann::json(nullptr)},
      {"group_size", opt.group_size},
      {"jobs", opt.jobs},
      {"inputs", {{"qa", opt.qa_path}, {"videos", opt.videos_path}}},
      {"counts",
       {{"questions", qa.records.size()},
        {"episodes", tasks.size()},
        {"written", writer.lines_written()},
        {"failed", failed}}},
      {"input_errors",
       {{"qa", errors_to_json(qa.errors)}, {"videos", errors_to_json(manifest.errors)}}},
      {"task_errors", task_errors}};
  write_meta(opt.out_path, meta);

  out << "episodes " << tasks.size() << ", written " << writer.lines_written() << ", failed "
      << failed << "\n";
  if (transport_failed) return kExitTransport;
  if (failed > 0 || !qa.errors.empty() || !manifest.errors.empty()) return kExitInput;
  return kExitOk;
}

// ---- score ----

struct ScoreOpts {
  std::string log_path, qa_path, out_path;
  std::string scorer = "exact";
  std::string judge_endpoint, judge_model, judge_rubric_file;
  int judge_max_retries = 3;
  RewardConfig reward;
  int jobs = 1;
};

std::unique_ptr<AnswerScorer> make_scorer(const ScoreOpts& opt, nlohmann::json& describe) {
  if (opt.scorer == "exact") {
    describe = {{"scorer", "exact"}};
    return std::make_unique<ExactMatchScorer>();
  }
  if (opt.scorer == "normalized") {
    describe = {{"scorer", "normalized"}};
    return std::make_unique<NormalizedStringScorer>();
  }
  if (opt.scorer == "judge") {
    if (opt.judge_endpoint.empty() || opt.judge_model.empty())
      throw InputError(
          "judge scorer needs --judge-endpoint and --judge-model (or the FRAMERL_JUDGE_* "
          "env vars)");
    auto client =
        make_judge_client(opt.judge_endpoint, opt.judge_model, opt.judge_max_retries);
    const std::string rubric =
        opt.judge_rubric_file.empty() ? kAnswerRubric : read_text_file(opt.judge_rubric_file);
    describe = {{"scorer", "judge"},
                {"endpoint", opt.judge_endpoint},
                {"model", opt.judge_model},
                {"rubric", opt.judge_rubric_file.empty() ? std::string(kAnswerRubricVersion)
                                                         : opt.judge_rubric_file}};
    return std::make_unique<JudgeAnswerScorer>(std::move(client), rubric, opt.judge_model);
  }
  throw InputError("unknown scorer \"" + opt.scorer + "\"");
}

int run_score(const ScoreOpts& opt, std::ostream& out, std::ostream& err) {
  validate(opt.reward);
  auto log = read_jsonl_file<TrajectoryRecord>(opt.log_path);
  report_line_errors(err, opt.log_path, log.errors);
  auto qa = read_jsonl_file<QARecord>(opt.qa_path);
  report_line_errors(err, opt.qa_path, qa.errors);

  std::map<std::string, const QARecord*> qa_by_id;
  for (const QARecord& r : qa.records) qa_by_id[r.qa_id] = &r;

  nlohmann::json scorer_meta;
  const std::unique_ptr<AnswerScorer> scorer = make_scorer(opt, scorer_meta);

  std::vector<ScoreTask> tasks;
  auto task_errors = nlohmann::json::array();
  for (const TrajectoryRecord& record : log.records) {
    const auto it = qa_by_id.find(record.qa_id);
    if (it == qa_by_id.end()) {
      err << "qa " << record.qa_id << " rollout " << record.rollout
          << ": no matching question record\n";
      task_errors.push_back({{"qa_id", record.qa_id},
                             {"rollout", record.rollout},
                             {"error", "no matching question record"},
                             {"deferred", false}});
      continue;
    }
    tasks.push_back({record, GroundTruth{it->second->ground_truth, it->second->question}});
  }

  const std::vector<ScoreOutcome> outcomes =
      opt.jobs > 1 ? score_records_parallel(tasks, *scorer, opt.reward, opt.jobs)
                   : score_records_serial(tasks, *scorer, opt.reward);

  JsonlWriter writer(opt.out_path);
  std::vector<RewardRecord> written;
  std::size_t deferred = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const ScoreOutcome& o = outcomes[i];
    if (o.record) {
      writer.write(*o.record);
      written.push_back(*o.record);
      continue;
    }
    if (o.deferred) ++deferred;
    err << "qa " << tasks[i].trajectory.qa_id << " rollout " << tasks[i].trajectory.rollout
        << (o.deferred ? " deferred: " : ": ") << *o.error << "\n";
    task_errors.push_back({{"qa_id", tasks[i].trajectory.qa_id},
                           {"rollout", tasks[i].trajectory.rollout},
                           {"error", *o.error},
                           {"deferred", o.deferred}});
  }
  writer.flush();

  double sum_total = 0.0, sum_acc = 0.0;
  std::int64_t n_fmt = 0, n_tool = 0, n_acc = 0;
  std::map<std::string, std::int64_t> histogram;
  for (const RewardRecord& r : written) {
    sum_total += r.breakdown.total;
    sum_acc += r.breakdown.acc;
    n_fmt += r.breakdown.g_fmt ? 1 : 0;
    n_tool += r.breakdown.g_tool ? 1 : 0;
    n_acc += r.breakdown.g_acc ? 1 : 0;
    ++histogram[reward_bin_label(r.breakdown.total)];
  }
  const double n = written.empty() ? 1.0 : static_cast<double>(written.size());
  nlohmann::json aggregate{{"records", written.size()},
                           {"mean_total", sum_total / n},
                           {"mean_acc", sum_acc / n},
                           {"format_valid_rate", static_cast<double>(n_fmt) / n},
                           {"tool_gate_rate", static_cast<double>(n_tool) / n},
                           {"acc_gate_rate", static_cast<double>(n_acc) / n},
                           {"histogram", histogram}};

  nlohmann::json meta{{"schema_version", kSchemaVersion},
                      {"command", "score"},
                      {"scorer", scorer_meta},
                      {"reward",
                       {{"acc_gate_threshold", opt.reward.acc_gate_threshold},
                        {"tool_success_coeff", opt.reward.tool_success_coeff},
                        {"curiosity_bonus", opt.reward.curiosity_bonus},
                        {"format_penalty", opt.reward.format_penalty}}},
                      {"jobs", opt.jobs},
                      {"inputs", {{"log", opt.log_path}, {"qa", opt.qa_path}}},
                      {"counts",
                       {{"trajectories", log.records.size()},
                        {"written", writer.lines_written()},
                        {"deferred", deferred}}},
                      {"input_errors",
                       {{"log", errors_to_json(log.errors)}, {"qa", errors_to_json(qa.errors)}}},
                      {"task_errors", task_errors},
                      {"aggregate", aggregate}};
  write_meta(opt.out_path, meta);

  out << aggregate.dump() << "\n";
  return deferred > 0 ? kExitTransport : kExitOk;
}

// ---- advantages ----

struct AdvantagesOpts {
  std::string rewards_path, out_path;
  GrpoConfig grpo;
  int jobs = 1;
};

int run_advantages(const AdvantagesOpts& opt, std::ostream& out, std::ostream& err) {
  auto rewards = read_jsonl_file<RewardRecord>(opt.rewards_path);
  report_line_errors(err, opt.rewards_path, rewards.errors);

  const GroupingOutcome grouping =
      opt.jobs > 1 ? group_reports_parallel(rewards.records, opt.grpo, opt.jobs)
                   : group_reports_serial(rewards.records, opt.grpo);
  for (const std::string& e : grouping.errors) err << e << "\n";

  JsonlWriter writer(opt.out_path);
  for (const GroupReport& report : grouping.reports) writer.write(report);
  writer.flush();

  nlohmann::json meta{{"schema_version", kSchemaVersion},
                      {"command", "advantages"},
                      {"grpo",
                       {{"clip_epsilon", opt.grpo.clip_epsilon},
                        {"kl_coeff", opt.grpo.kl_coeff},
                        {"std_floor", opt.grpo.std_floor}}},
                      {"jobs", opt.jobs},
                      {"inputs", {{"rewards", opt.rewards_path}}},
                      {"counts",
                       {{"records", rewards.records.size()},
                        {"groups", grouping.reports.size()},
                        {"group_errors", grouping.errors.size()}}},
                      {"input_errors", errors_to_json(rewards.errors)},
                      {"group_errors", grouping.errors}};
  write_meta(opt.out_path, meta);

  out << "groups " << grouping.reports.size() << ", errors " << grouping.errors.size() << "\n";
  return kExitOk;
}

// ---- stats ----

struct StatsOpts {
  std::string log_path, qa_path, rewards_path, out_path;
  int jobs = 1;
};

int run_stats(const StatsOpts& opt, std::ostream& out, std::ostream& err) {
  auto log = read_jsonl_file<TrajectoryRecord>(opt.log_path);
  report_line_errors(err, opt.log_path, log.errors);

  StatsReport report = opt.jobs > 1 ? collect_stats_parallel(log.records, opt.jobs)
                                    : collect_stats_serial(log.records);

  if (!opt.qa_path.empty()) {
    auto qa = read_jsonl_file<QARecord>(opt.qa_path);
    report_line_errors(err, opt.qa_path, qa.errors);
    join_dimensions(report, log.records, qa.records);
  }
  if (!opt.rewards_path.empty()) {
    auto rewards = read_jsonl_file<RewardRecord>(opt.rewards_path);
    report_line_errors(err, opt.rewards_path, rewards.errors);
    join_rewards(report, rewards.records);
  }

  // Independent recount: re-derive the frame total from the per-step frame
  // lists instead of trusting the frames_consumed field.
  std::int64_t recount_total = 0;
  for (const TrajectoryRecord& r : log.records)
    for (const TrajStep& step : r.trajectory.steps)
      recount_total += static_cast<std::int64_t>(step.frames.size());
  const double recount_mean =
      report.episodes > 0 ? static_cast<double>(recount_total) / static_cast<double>(report.episodes)
                          : 0.0;
  const bool consistent = std::fabs(recount_mean - report.mean_frames) <= 1e-9;
  if (!consistent)
    err << "frame recount mismatch: frames_consumed mean " << report.mean_frames
        << " vs per-step recount " << recount_mean << "\n";

  nlohmann::json j = report.to_json();
  j["recount_mean_frames"] = recount_mean;
  j["recount_consistent"] = consistent;
  j["parse_errors"] = log.errors.size();

  out << j.dump(2) << "\n";
  if (!opt.out_path.empty()) {
    std::ofstream file(opt.out_path);
    if (!file) throw InputError("cannot open " + opt.out_path);
    file << j.dump(2) << "\n";
  }
  return kExitOk;
}

// ---- distill templates ----

struct TemplatesOpts {
  std::string source_path, templates_path, out_path;
};

int run_templates(const TemplatesOpts& opt, std::ostream& out, std::ostream& err) {
  auto templates = read_jsonl_file<TaskTemplate>(opt.templates_path);
  report_line_errors(err, opt.templates_path, templates.errors);
  if (templates.records.empty())
    throw InputError(opt.templates_path + ": no usable templates");

  TemplateRegistry registry;
  for (TaskTemplate& t : templates.records) registry.register_template(std::move(t));

  std::ifstream in(opt.source_path);
  if (!in) throw InputError("cannot open " + opt.source_path);

  JsonlWriter writer(opt.out_path);
  auto row_errors = nlohmann::json::array();
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = parse_jsonl_line(line);
      SourceRecord record;
      for (const auto& [key, value] : j.items())
        record.fields[key] = value.is_string() ? value.get<std::string>() : value.dump();
      const auto dataset = record.fields.find("source_dataset");
      const auto task = record.fields.find("task");
      if (dataset == record.fields.end() || task == record.fields.end())
        throw InputError("row lacks source_dataset/task columns");
      writer.write(registry.apply(dataset->second, task->second, record));
    } catch (const std::exception& e) {
      err << opt.source_path << ":" << line_number << ": " << e.what() << "\n";
      row_errors.push_back({{"line", line_number}, {"error", e.what()}});
    }
  }
  writer.flush();

  nlohmann::json meta{{"schema_version", kSchemaVersion},
                      {"command", "distill templates"},
                      {"inputs", {{"source", opt.source_path}, {"templates", opt.templates_path}}},
                      {"counts",
                       {{"templates", registry.size()},
                        {"written", writer.lines_written()},
                        {"rejected_rows", row_errors.size()}}},
                      {"template_errors", errors_to_json(templates.errors)},
                      {"row_errors", row_errors}};
  write_meta(opt.out_path, meta);

  out << "questions " << writer.lines_written() << ", rejected rows " << row_errors.size()
      << "\n";
  return kExitOk;
}

// ---- distill split ----

struct SplitOpts {
  std::string qa_path, out_path;
  SplitRatios ratios;
  std::vector<std::string> overlaps;  // "datasetA:datasetB"
  std::uint64_t seed = 0;
};

int run_split(const SplitOpts& opt, std::ostream& out, std::ostream& err) {
  auto qa = read_jsonl_file<QARecord>(opt.qa_path);
  report_line_errors(err, opt.qa_path, qa.errors);

  std::vector<std::pair<std::string, std::string>> pairs;
  for (const std::string& overlap : opt.overlaps) {
    const std::size_t colon = overlap.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == overlap.size())
      throw InputError("--overlap wants datasetA:datasetB, got \"" + overlap + "\"");
    pairs.emplace_back(overlap.substr(0, colon), overlap.substr(colon + 1));
  }

  const SplitPlan plan = plan_splits(qa.records, opt.ratios, pairs, opt.seed);

  std::ofstream file(opt.out_path);
  if (!file) throw InputError("cannot open " + opt.out_path);
  file << nlohmann::json(plan).dump(2) << "\n";

  std::map<std::string, std::int64_t> counts;
  for (const auto& [video, split] : plan.assignment) ++counts[to_string(split)];
  out << "videos " << plan.assignment.size() << " (";
  bool first = true;
  for (const auto& [name, count] : counts) {
    if (!first) out << ", ";
    out << name << " " << count;
    first = false;
  }
  out << "), exclusions " << plan.exclusions.size() << "\n";
  return kExitOk;
}

// ---- distill cot ----

// Fixture judge for offline runs: a constant score with per-qa overrides.
class ScriptedCotJudge final : public CotJudge {
 public:
  ScriptedCotJudge(std::optional<int> fallback, std::map<std::string, int> scores)
      : fallback_(fallback), scores_(std::move(scores)) {}

  JudgeVerdict judge(const QARecord& qa, const EpisodeRecord&) override {
    const auto it = scores_.find(qa.qa_id);
    if (it != scores_.end()) return {it->second, "scripted"};
    if (fallback_) return {*fallback_, "scripted default"};
    throw InputError("no scripted judge score for qa \"" + qa.qa_id + "\"");
  }

 private:
  std::optional<int> fallback_;
  std::map<std::string, int> scores_;
};

struct CotOpts {
  std::string qa_path, videos_path, plan_path, out_path, rejected_path;
  std::string split = "train_sft";
  PolicySource teacher;
  EpisodeFlags episode;
  std::string judge_endpoint, judge_model, judge_rubric_file, judge_scores_path;
  int judge_max_retries = 3;
  int threshold = 80;
  int attempts = 1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
};

std::unique_ptr<CotJudge> make_cot_judge(const CotOpts& opt, nlohmann::json& describe) {
  const bool scripted = !opt.judge_scores_path.empty();
  const bool remote = !opt.judge_endpoint.empty();
  if (scripted == remote)
    throw InputError("choose exactly one of --judge-scores or --judge-endpoint");
  if (scripted) {
    const nlohmann::json j = parse_jsonl_line(read_text_file(opt.judge_scores_path));
    std::optional<int> fallback;
    if (j.contains("default")) fallback = j["default"].get<int>();
    std::map<std::string, int> scores;
    if (j.contains("scores"))
      for (const auto& [qa_id, score] : j["scores"].items()) scores[qa_id] = score.get<int>();
    describe = {{"mode", "scripted"}, {"scores", opt.judge_scores_path}};
    return std::make_unique<ScriptedCotJudge>(fallback, std::move(scores));
  }
  if (opt.judge_model.empty())
    throw InputError("judge endpoint mode needs --judge-model or FRAMERL_JUDGE_MODEL");
  auto client = make_judge_client(opt.judge_endpoint, opt.judge_model, opt.judge_max_retries);
  const std::string rubric =
      opt.judge_rubric_file.empty() ? kCotRubric : read_text_file(opt.judge_rubric_file);
  describe = {{"mode", "endpoint"},
              {"endpoint", opt.judge_endpoint},
              {"model", opt.judge_model},
              {"rubric", opt.judge_rubric_file.empty() ? std::string(kCotRubricVersion)
                                                       : opt.judge_rubric_file}};
  return std::make_unique<RemoteCotJudge>(std::move(client), rubric);
}

int run_cot(const CotOpts& opt, std::ostream& out, std::ostream& err) {
  auto qa = read_jsonl_file<QARecord>(opt.qa_path);
  report_line_errors(err, opt.qa_path, qa.errors);
  auto manifest = read_jsonl_file<VideoManifestEntry>(opt.videos_path);
  report_line_errors(err, opt.videos_path, manifest.errors);

  const auto split = split_from_string(opt.split);
  if (!split) throw InputError("unknown split \"" + opt.split + "\"");
  SplitPlan plan;
  from_json(parse_jsonl_line(read_text_file(opt.plan_path)), plan);
  const std::vector<QARecord> selected = select_records(qa.records, plan, *split);

  std::map<std::string, VideoHandle> videos;
  for (const VideoManifestEntry& e : manifest.records) videos[e.video_id] = video_from_manifest(e);
  VideoLookup video_for = [&videos](const std::string& video_id) -> VideoHandle {
    const auto it = videos.find(video_id);
    if (it == videos.end()) throw InputError("video \"" + video_id + "\" is not in the manifest");
    return it->second;
  };

  std::optional<std::uint64_t> seed;
  if (opt.seed_set) seed = opt.seed;
  const PolicySetup setup = make_policy_setup(opt.teacher, seed);
  TeacherFactory teacher_for = [&setup](const QARecord& record) {
    return setup.factory(record, 0);
  };

  nlohmann::json judge_meta;
  const std::unique_ptr<CotJudge> judge = make_cot_judge(opt, judge_meta);

  DistillConfig config;
  config.judge_threshold = opt.threshold;
  config.episode = resolve_episode(opt.episode);
  config.attempts = opt.attempts;
  config.jobs = opt.jobs;

  const DistillOutcome outcome = distill_cot(selected, teacher_for, video_for, *judge, config);

  JsonlWriter writer(opt.out_path);
  std::unique_ptr<JsonlWriter> rejected;
  if (!opt.rejected_path.empty()) rejected = std::make_unique<JsonlWriter>(opt.rejected_path);
  std::size_t n_retained = 0, n_rejected = 0;
  for (const CoTSample& sample : outcome.samples) {
    if (sample.retained) {
      writer.write(nlohmann::json(sample));
      ++n_retained;
    } else {
      if (rejected) rejected->write(nlohmann::json(sample));
      ++n_rejected;
    }
  }
  writer.flush();
  if (rejected) rejected->flush();

  auto failure_json = nlohmann::json::array();
  bool transport_failed = false;
  for (const DistillFailure& f : outcome.failures) {
    err << "qa " << f.qa_id << ": " << f.reason << "\n";
    failure_json.push_back({{"qa_id", f.qa_id}, {"error", f.reason}, {"transport", f.transport}});
    transport_failed = transport_failed || f.transport;
  }

  nlohmann::json meta{
      {"schema_version", kSchemaVersion},
      {"command", "distill cot"},
      {"teacher", setup.describe},
      {"judge", judge_meta},
      {"episode", episode_meta(config.episode, opt.episode.system_prompt_file)},
      {"threshold", opt.threshold},
      {"attempts", opt.attempts},
      {"split", opt.split},
      {"seed", opt.seed_set ? nlohmann::json(opt.seed) : nlohmann::json(nullptr)},
      {"jobs", opt.jobs},
      {"inputs",
       {{"qa", opt.qa_path}, {"videos", opt.videos_path}, {"plan", opt.plan_path}}},
      {"counts",
       {{"selected", selected.size()},
        {"retained", n_retained},
        {"rejected", n_rejected},
        {"failed", outcome.failures.size()}}},
      {"input_errors",
       {{"qa", errors_to_json(qa.errors)}, {"videos", errors_to_json(manifest.errors)}}},
      {"failures", failure_json}};
  write_meta(opt.out_path, meta);

  out << "selected " << selected.size() << ", retained " << n_retained << ", rejected "
      << n_rejected << ", failed " << outcome.failures.size() << "\n";
  if (transport_failed) return kExitTransport;
  if (!outcome.failures.empty()) return kExitInput;
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"frame-extraction rollout engine", "framerl"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read option defaults from an INI/TOML file");

  RolloutOpts rollout;
  CLI::App* rollout_cmd = app.add_subcommand("rollout", "run episodes over a QA manifest");
  rollout_cmd->add_option("--qa", rollout.qa_path, "QA records (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  rollout_cmd->add_option("--videos", rollout.videos_path, "video manifest (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  rollout_cmd->add_option("--out", rollout.out_path, "trajectory log to write")->required();
  add_policy_flags(rollout_cmd, rollout.policy, true);
  add_episode_flags(rollout_cmd, rollout.episode);
  rollout_cmd->add_option("--group-size", rollout.group_size, "rollouts per question")
      ->check(CLI::PositiveNumber);
  CLI::Option* rollout_seed =
      rollout_cmd->add_option("--seed", rollout.seed, "decoding seed base, recorded in the meta");
  rollout_cmd->add_option("--jobs", rollout.jobs, "parallel episodes")->check(CLI::PositiveNumber);

  ScoreOpts score;
  CLI::App* score_cmd = app.add_subcommand("score", "reward a trajectory log");
  score_cmd->add_option("--log", score.log_path, "trajectory log (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  score_cmd->add_option("--qa", score.qa_path, "QA records with ground truth (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  score_cmd->add_option("--out", score.out_path, "reward report to write")->required();
  score_cmd->add_option("--scorer", score.scorer, "exact | normalized | judge")
      ->check(CLI::IsMember({"exact", "normalized", "judge"}));
  score_cmd->add_option("--judge-endpoint", score.judge_endpoint, "judge chat endpoint")
      ->envname("FRAMERL_JUDGE_ENDPOINT");
  score_cmd->add_option("--judge-model", score.judge_model, "judge model id")
      ->envname("FRAMERL_JUDGE_MODEL");
  score_cmd->add_option("--judge-rubric-file", score.judge_rubric_file,
                        "override the built-in answer rubric")
      ->check(CLI::ExistingFile);
  score_cmd->add_option("--judge-max-retries", score.judge_max_retries,
                        "judge request retries beyond the first attempt");
  score_cmd->add_option("--acc-gate-threshold", score.reward.acc_gate_threshold,
                        "accuracy needed to open the gate");
  score_cmd->add_option("--tool-success-coeff", score.reward.tool_success_coeff,
                        "tool bonus per unit accuracy");
  score_cmd->add_option("--curiosity-bonus", score.reward.curiosity_bonus,
                        "flat tool bonus below the gate");
  score_cmd->add_option("--format-penalty", score.reward.format_penalty,
                        "penalty for malformed trajectories");
  score_cmd->add_option("--jobs", score.jobs, "parallel scoring")->check(CLI::PositiveNumber);

  AdvantagesOpts advantages;
  CLI::App* advantages_cmd =
      app.add_subcommand("advantages", "group-normalize a reward report");
  advantages_cmd->add_option("--rewards", advantages.rewards_path, "reward report (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  advantages_cmd->add_option("--out", advantages.out_path, "group report to write")->required();
  advantages_cmd->add_option("--clip-epsilon", advantages.grpo.clip_epsilon,
                             "surrogate clip width");
  advantages_cmd->add_option("--kl-coeff", advantages.grpo.kl_coeff, "reference KL weight");
  advantages_cmd->add_option("--std-floor", advantages.grpo.std_floor,
                             "minimum normalization denominator");
  advantages_cmd->add_option("--jobs", advantages.jobs, "parallel groups")
      ->check(CLI::PositiveNumber);

  StatsOpts stats;
  CLI::App* stats_cmd = app.add_subcommand("stats", "frame-budget statistics over a log");
  stats_cmd->add_option("--log", stats.log_path, "trajectory log (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  stats_cmd->add_option("--qa", stats.qa_path, "QA records for per-dimension counts")
      ->check(CLI::ExistingFile);
  stats_cmd->add_option("--rewards", stats.rewards_path, "reward report for the histogram")
      ->check(CLI::ExistingFile);
  stats_cmd->add_option("--out", stats.out_path, "also write the report here");
  stats_cmd->add_option("--jobs", stats.jobs, "parallel tallying")->check(CLI::PositiveNumber);

  CLI::App* distill_cmd = app.add_subcommand("distill", "SFT data pipeline stages");
  distill_cmd->require_subcommand(1);

  TemplatesOpts templates;
  CLI::App* templates_cmd =
      distill_cmd->add_subcommand("templates", "convert source rows into QA records");
  templates_cmd->add_option("--source", templates.source_path, "source rows (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  templates_cmd->add_option("--templates", templates.templates_path, "task templates (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  templates_cmd->add_option("--out", templates.out_path, "QA records to write")->required();

  SplitOpts split;
  CLI::App* split_cmd = distill_cmd->add_subcommand("split", "plan video-level splits");
  split_cmd->add_option("--qa", split.qa_path, "QA records (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  split_cmd->add_option("--out", split.out_path, "split plan to write")->required();
  split_cmd->add_option("--sft", split.ratios.sft, "train_sft share");
  split_cmd->add_option("--rl", split.ratios.rl, "train_rl share");
  split_cmd->add_option("--test", split.ratios.test, "test share");
  split_cmd->add_option("--overlap", split.overlaps,
                        "datasetA:datasetB pair sharing footage (repeatable)");
  split_cmd->add_option("--seed", split.seed, "assignment seed");

  CotOpts cot;
  CLI::App* cot_cmd = distill_cmd->add_subcommand("cot", "generate and filter teacher traces");
  cot_cmd->add_option("--qa", cot.qa_path, "QA records (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  cot_cmd->add_option("--videos", cot.videos_path, "video manifest (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  cot_cmd->add_option("--plan", cot.plan_path, "split plan (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cot_cmd->add_option("--out", cot.out_path, "retained samples to write")->required();
  cot_cmd->add_option("--rejected", cot.rejected_path, "write filtered-out samples here");
  cot_cmd->add_option("--split", cot.split, "which split to distill");
  add_policy_flags(cot_cmd, cot.teacher, false);
  add_episode_flags(cot_cmd, cot.episode);
  cot_cmd->add_option("--judge-endpoint", cot.judge_endpoint, "judge chat endpoint")
      ->envname("FRAMERL_JUDGE_ENDPOINT");
  cot_cmd->add_option("--judge-model", cot.judge_model, "judge model id")
      ->envname("FRAMERL_JUDGE_MODEL");
  cot_cmd->add_option("--judge-rubric-file", cot.judge_rubric_file,
                      "override the built-in trace rubric")
      ->check(CLI::ExistingFile);
  cot_cmd->add_option("--judge-scores", cot.judge_scores_path,
                      "scripted judge scores (JSON: {default, scores})")
      ->check(CLI::ExistingFile);
  cot_cmd->add_option("--judge-max-retries", cot.judge_max_retries,
                      "judge request retries beyond the first attempt");
  cot_cmd->add_option("--threshold", cot.threshold, "minimum judge score to retain");
  cot_cmd->add_option("--attempts", cot.attempts, "episodes per record until one is retained")
      ->check(CLI::PositiveNumber);
  CLI::Option* cot_seed =
      cot_cmd->add_option("--seed", cot.seed, "decoding seed base, recorded in the meta");
  cot_cmd->add_option("--jobs", cot.jobs, "parallel records")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  rollout.seed_set = rollout_seed->count() > 0;
  cot.seed_set = cot_seed->count() > 0;

  try {
    if (rollout_cmd->parsed()) return run_rollout(rollout, out, err);
    if (score_cmd->parsed()) return run_score(score, out, err);
    if (advantages_cmd->parsed()) return run_advantages(advantages, out, err);
    if (stats_cmd->parsed()) return run_stats(stats, out, err);
    if (distill_cmd->parsed()) {
      if (templates_cmd->parsed()) return run_templates(templates, out, err);
      if (split_cmd->parsed()) return run_split(split, out, err);
      if (cot_cmd->parsed()) return run_cot(cot, out, err);
    }
    err << "no subcommand selected\n";
    return kExitInput;
  } catch (const PolicyTransportError& e) {
    err << "error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const JudgeUnavailableError& e) {
    err << "error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace framerl
