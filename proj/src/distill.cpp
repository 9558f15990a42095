#include "framerl/distill.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "framerl/rng.hpp"

namespace framerl {

namespace {

const std::string& field_or_throw(const SourceRecord& record, const std::string& column,
                                  const std::string& what) {
  const auto it = record.fields.find(column);
  if (it == record.fields.end())
    throw MissingSlotError(what + ": source column \"" + column + "\" is missing");
  return it->second;
}

const std::string& slot_column(const TaskTemplate& tmpl, const std::string& slot) {
  const auto it = tmpl.column_map.find(slot);
  return it == tmpl.column_map.end() ? slot : it->second;
}

bool slot_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

std::string render_template(const std::string& text, const TaskTemplate& tmpl,
                            const SourceRecord& record) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && slot_char(text[j])) ++j;
    if (j == i + 1 || j == text.size() || text[j] != '}') {
      // not a slot, keep the brace literally
      out.push_back(text[i++]);
      continue;
    }
    const std::string slot = text.substr(i + 1, j - i - 1);
    out += field_or_throw(record, slot_column(tmpl, slot), "template slot {" + slot + "}");
    i = j + 1;
  }
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const TaskTemplate& t) {
  j = nlohmann::json{{"source_dataset", t.source_dataset},
                     {"task", t.task},
                     {"sport", t.sport},
                     {"task_dimension", to_string(t.task_dimension)},
                     {"answer_format", to_string(t.answer_format)},
                     {"question_template", t.question_template},
                     {"truth_slot", t.truth_slot},
                     {"vocabulary", t.vocabulary},
                     {"n_choices", t.n_choices},
                     {"seed", t.seed},
                     {"qa_id_column", t.qa_id_column},
                     {"video_id_column", t.video_id_column},
                     {"column_map", t.column_map}};
}

void from_json(const nlohmann::json& j, TaskTemplate& t) {
  t = TaskTemplate{};
  const auto require = [&j](const char* key) -> const nlohmann::json& {
    const auto it = j.find(key);
    if (it == j.end()) throw InputError(std::string("missing field \"") + key + "\"");
    return *it;
  };
  t.source_dataset = require("source_dataset").get<std::string>();
  t.task = require("task").get<std::string>();
  t.sport = require("sport").get<std::string>();
  const std::string dimension = require("task_dimension").get<std::string>();
  const auto parsed_dimension = task_dimension_from_string(dimension);
  if (!parsed_dimension)
    throw InputError("task_dimension \"" + dimension + "\" is not in the four-dimension taxonomy");
  t.task_dimension = *parsed_dimension;
  const std::string format = require("answer_format").get<std::string>();
  const auto parsed_format = answer_format_from_string(format);
  if (!parsed_format) throw InputError("unknown answer_format \"" + format + "\"");
  t.answer_format = *parsed_format;
  t.question_template = require("question_template").get<std::string>();
  t.truth_slot = require("truth_slot").get<std::string>();
  if (j.contains("vocabulary")) t.vocabulary = j["vocabulary"].get<std::vector<std::string>>();
  if (j.contains("n_choices")) t.n_choices = j["n_choices"].get<int>();
  if (j.contains("seed")) t.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("qa_id_column")) t.qa_id_column = j["qa_id_column"].get<std::string>();
  if (j.contains("video_id_column")) t.video_id_column = j["video_id_column"].get<std::string>();
  if (j.contains("column_map"))
    t.column_map = j["column_map"].get<std::map<std::string, std::string>>();
}

QARecord apply_template(const SourceRecord& record, const TaskTemplate& tmpl) {
  QARecord qa;
  qa.qa_id = field_or_throw(record, tmpl.qa_id_column, "qa id");
  qa.video_id = field_or_throw(record, tmpl.video_id_column, "video id");
  qa.source_dataset = tmpl.source_dataset;
  qa.sport = tmpl.sport;
  qa.task_dimension = tmpl.task_dimension;
  qa.answer_format = tmpl.answer_format;

  std::string question = render_template(tmpl.question_template, tmpl, record);
  const std::string truth =
      field_or_throw(record, slot_column(tmpl, tmpl.truth_slot), "truth slot {" + tmpl.truth_slot + "}");
  qa.ground_truth = truth;

  if (tmpl.answer_format == AnswerFormat::MultipleChoice) {
    if (tmpl.n_choices < 2) throw InputError("n_choices must be >= 2");
    std::vector<std::string> pool;
    for (const std::string& entry : tmpl.vocabulary)
      if (entry != truth && std::find(pool.begin(), pool.end(), entry) == pool.end())
        pool.push_back(entry);
    const std::size_t needed = static_cast<std::size_t>(tmpl.n_choices - 1);
    if (pool.size() < needed)
      throw InputError("vocabulary for (" + tmpl.source_dataset + ", " + tmpl.task + ") has " +
                       std::to_string(pool.size()) + " distractors, need " +
                       std::to_string(needed));
    SplitMix64 rng(tmpl.seed ^ fnv1a64(qa.qa_id));
    deterministic_shuffle(pool, rng);
    std::vector<std::string> options(pool.begin(), pool.begin() + static_cast<long>(needed));
    options.push_back(truth);
    deterministic_shuffle(options, rng);
    std::ostringstream os;
    os << question << "\n\nOptions:";
    for (const std::string& option : options) os << "\n- " << option;
    question = os.str();
  }

  qa.question = std::move(question);
  return qa;
}

void TemplateRegistry::register_template(TaskTemplate tmpl) {
  const auto key = std::make_pair(tmpl.source_dataset, tmpl.task);
  if (templates_.count(key))
    throw InputError("template already registered for (" + key.first + ", " + key.second + ")");
  templates_.emplace(key, std::move(tmpl));
}

const TaskTemplate& TemplateRegistry::lookup(const std::string& source_dataset,
                                             const std::string& task) const {
  const auto it = templates_.find(std::make_pair(source_dataset, task));
  if (it == templates_.end())
    throw UnknownTemplateError("no template for (" + source_dataset + ", " + task + ")");
  return it->second;
}

QARecord TemplateRegistry::apply(const std::string& source_dataset, const std::string& task,
                                 const SourceRecord& record) const {
  return apply_template(record, lookup(source_dataset, task));
}

const char* to_string(Split split) {
  switch (split) {
    case Split::TrainSft: return "train_sft";
    case Split::TrainRl: return "train_rl";
    case Split::Test: return "test";
  }
  return "unknown";
}

std::optional<Split> split_from_string(std::string_view name) {
  if (name == "train_sft") return Split::TrainSft;
  if (name == "train_rl") return Split::TrainRl;
  if (name == "test") return Split::Test;
  return std::nullopt;
}

void to_json(nlohmann::json& j, const SplitPlan& plan) {
  nlohmann::json assignment = nlohmann::json::object();
  for (const auto& [video_id, split] : plan.assignment) assignment[video_id] = to_string(split);
  nlohmann::json exclusions = nlohmann::json::array();
  for (const Exclusion& e : plan.exclusions)
    exclusions.push_back({{"video_id", e.video_id}, {"reason", e.reason}});
  j = nlohmann::json{
      {"schema_version", kSchemaVersion},
      {"seed", plan.seed},
      {"ratios", {{"sft", plan.ratios.sft}, {"rl", plan.ratios.rl}, {"test", plan.ratios.test}}},
      {"assignment", std::move(assignment)},
      {"exclusions", std::move(exclusions)}};
}

void from_json(const nlohmann::json& j, SplitPlan& plan) {
  plan = SplitPlan{};
  if (j.contains("seed")) plan.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("ratios")) {
    plan.ratios.sft = j["ratios"].value("sft", plan.ratios.sft);
    plan.ratios.rl = j["ratios"].value("rl", plan.ratios.rl);
    plan.ratios.test = j["ratios"].value("test", plan.ratios.test);
  }
  const auto it = j.find("assignment");
  if (it == j.end()) throw InputError("missing field \"assignment\"");
  for (const auto& [video_id, name] : it->items()) {
    const auto split = split_from_string(name.get<std::string>());
    if (!split) throw InputError("unknown split \"" + name.get<std::string>() + "\"");
    plan.assignment[video_id] = *split;
  }
  if (j.contains("exclusions"))
    for (const auto& e : j["exclusions"])
      plan.exclusions.push_back(
          {e.at("video_id").get<std::string>(), e.at("reason").get<std::string>()});
}

SplitPlan plan_splits(const std::vector<QARecord>& records, const SplitRatios& ratios,
                      const std::vector<std::pair<std::string, std::string>>& overlap_pairs,
                      std::uint64_t seed) {
  if (records.empty()) throw EmptyInputError("cannot plan splits over zero records");
  if (ratios.sft < 0.0 || ratios.rl < 0.0 || ratios.test < 0.0 ||
      std::abs(ratios.sft + ratios.rl + ratios.test - 1.0) > 1e-9)
    throw InputError("split ratios must be non-negative and sum to 1");

  // First-appearance order keeps the shuffle input independent of QA counts.
  std::vector<std::string> videos;
  std::map<std::string, std::set<std::string>> datasets_of;
  for (const QARecord& qa : records) {
    auto& datasets = datasets_of[qa.video_id];
    if (datasets.empty()) videos.push_back(qa.video_id);
    datasets.insert(qa.source_dataset);
  }

  SplitMix64 rng(seed);
  deterministic_shuffle(videos, rng);

  const double n = static_cast<double>(videos.size());
  const std::array<double, 3> targets{n * ratios.sft, n * ratios.rl, n * ratios.test};
  std::array<std::size_t, 3> counts{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    counts[static_cast<std::size_t>(s)] = static_cast<std::size_t>(std::floor(targets[static_cast<std::size_t>(s)]));
    assigned += counts[static_cast<std::size_t>(s)];
  }
  // Largest remainder gets the leftover videos; ties resolve in declaration
  // order (sft, rl, test).
  while (assigned < videos.size()) {
    int best = 0;
    double best_frac = -1.0;
    for (int s = 0; s < 3; ++s) {
      const double frac = targets[static_cast<std::size_t>(s)] -
                          static_cast<double>(counts[static_cast<std::size_t>(s)]);
      if (frac > best_frac + 1e-12) {
        best_frac = frac;
        best = s;
      }
    }
    ++counts[static_cast<std::size_t>(best)];
    ++assigned;
  }

  SplitPlan plan;
  plan.seed = seed;
  plan.ratios = ratios;
  std::size_t cursor = 0;
  for (int s = 0; s < 3; ++s) {
    const Split split = static_cast<Split>(s);
    for (std::size_t i = 0; i < counts[static_cast<std::size_t>(s)]; ++i, ++cursor)
      plan.assignment[videos[cursor]] = split;
  }

  for (const auto& [video_id, split] : plan.assignment) {
    if (split != Split::Test) continue;
    const auto& datasets = datasets_of[video_id];
    for (const auto& [a, b] : overlap_pairs) {
      if (datasets.count(a) && datasets.count(b)) {
        plan.exclusions.push_back(
            {video_id, "assigned to test while shared between overlapping datasets \"" + a +
                           "\" and \"" + b + "\"; removed from all pools to keep training clean"});
      }
    }
  }
  return plan;
}

std::vector<QARecord> select_records(const std::vector<QARecord>& records, const SplitPlan& plan,
                                     Split split) {
  std::set<std::string> excluded;
  for (const Exclusion& e : plan.exclusions) excluded.insert(e.video_id);
  std::vector<QARecord> out;
  for (const QARecord& qa : records) {
    const auto it = plan.assignment.find(qa.video_id);
    if (it == plan.assignment.end() || it->second != split) continue;
    if (excluded.count(qa.video_id)) continue;
    out.push_back(qa);
  }
  return out;
}

void to_json(nlohmann::json& j, const CoTSample& sample) {
  j = nlohmann::json{{"schema_version", kSchemaVersion},
                     {"qa_id", sample.qa_id},
                     {"judge_score", sample.judge_score},
                     {"retained", sample.retained},
                     {"judge_rationale", sample.judge_rationale},
                     {"trajectory", trajectory_to_json(sample.trajectory)},
                     {"conversation", conversation_to_json(sample.conversation)}};
}

RemoteCotJudge::RemoteCotJudge(std::shared_ptr<JudgeClient> client, std::string rubric)
    : client_(std::move(client)), rubric_(std::move(rubric)) {
  if (!client_) throw InputError("cot judge needs a judge client");
}

JudgeVerdict RemoteCotJudge::judge(const QARecord& qa, const EpisodeRecord& episode) {
  std::ostringstream trace;
  for (std::size_t i = 0; i < episode.trajectory.steps.size(); ++i) {
    if (i > 0) trace << "\n\n";
    trace << "[turn " << i + 1 << "]\n" << episode.trajectory.steps[i].raw_text;
  }
  return client_->score(rubric_, qa.question, qa.ground_truth, trace.str());
}

namespace {

struct RecordResult {
  std::optional<CoTSample> sample;
  std::optional<DistillFailure> failure;
};

RecordResult distill_one(const QARecord& qa, const TeacherFactory& teacher_for,
                         const VideoLookup& video_for, CotJudge& judge,
                         const DistillConfig& config) {
  RecordResult result;
  try {
    const VideoHandle video = video_for(qa.video_id);
    CoTSample best;
    for (int attempt = 0; attempt < std::max(1, config.attempts); ++attempt) {
      const std::unique_ptr<Policy> teacher = teacher_for(qa);
      if (!teacher) throw InputError("teacher factory returned null for " + qa.qa_id);
      const EpisodeRecord episode = run_episode(video, qa.question, *teacher, config.episode);
      const JudgeVerdict verdict = judge.judge(qa, episode);

      CoTSample sample;
      sample.qa_id = qa.qa_id;
      sample.trajectory = episode.trajectory;
      sample.judge_score = verdict.score;
      sample.judge_rationale = verdict.rationale;
      sample.conversation = episode.conversation;
      sample.retained =
          episode.trajectory.format_valid && verdict.score >= config.judge_threshold;
      best = std::move(sample);
      if (best.retained) break;
    }
    result.sample = std::move(best);
  } catch (const PolicyTransportError& e) {
    result.failure = DistillFailure{qa.qa_id, e.what(), true};
  } catch (const JudgeUnavailableError& e) {
    result.failure = DistillFailure{qa.qa_id, e.what(), true};
  } catch (const std::exception& e) {
    result.failure = DistillFailure{qa.qa_id, e.what()};
  }
  return result;
}

}  // namespace

DistillOutcome distill_cot(const std::vector<QARecord>& records, const TeacherFactory& teacher_for,
                           const VideoLookup& video_for, CotJudge& judge,
                           const DistillConfig& config) {
  std::vector<RecordResult> results(records.size());
  const int jobs = std::max(1, config.jobs);

#ifdef _OPENMP
  if (jobs > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
    for (std::size_t i = 0; i < records.size(); ++i)
      results[i] = distill_one(records[i], teacher_for, video_for, judge, config);
  } else {
    for (std::size_t i = 0; i < records.size(); ++i)
      results[i] = distill_one(records[i], teacher_for, video_for, judge, config);
  }
#else
  for (std::size_t i = 0; i < records.size(); ++i)
    results[i] = distill_one(records[i], teacher_for, video_for, judge, config);
#endif

  DistillOutcome outcome;
  for (RecordResult& r : results) {
    if (r.sample) outcome.samples.push_back(std::move(*r.sample));
    if (r.failure) outcome.failures.push_back(std::move(*r.failure));
  }
  return outcome;
}

DistillOutcome distill_cot(const std::vector<QARecord>& records, Policy& teacher,
                           const VideoLookup& video_for, CotJudge& judge,
                           const DistillConfig& config) {
  DistillConfig serial = config;
  serial.jobs = 1;  // one shared teacher cannot serve interleaved episodes

  DistillOutcome outcome;
  for (const QARecord& qa : records) {
    // Wrap the shared policy so distill_one can "create" it per attempt.
    class Borrowed final : public Policy {
     public:
      explicit Borrowed(Policy& inner) : inner_(inner) {}
      PolicyTurnResponse next_turn(const PolicyTurnRequest& request) override {
        return inner_.next_turn(request);
      }

     private:
      Policy& inner_;
    };
    const TeacherFactory borrow = [&teacher](const QARecord&) -> std::unique_ptr<Policy> {
      return std::make_unique<Borrowed>(teacher);
    };
    RecordResult r = distill_one(qa, borrow, video_for, judge, serial);
    if (r.sample) outcome.samples.push_back(std::move(*r.sample));
    if (r.failure) outcome.failures.push_back(std::move(*r.failure));
  }
  return outcome;
}

}  // namespace framerl
