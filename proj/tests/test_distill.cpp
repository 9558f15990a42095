#include <atomic>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "framerl/distill.hpp"
#include "framerl/environment.hpp"
#include "framerl/errors.hpp"
#include "framerl/policy.hpp"

using namespace framerl;
using nlohmann::json;

namespace {

TaskTemplate action_template() {
  TaskTemplate tmpl;
  tmpl.source_dataset = "FencingDB";
  tmpl.task = "action_recognition";
  tmpl.sport = "fencing";
  tmpl.task_dimension = TaskDimension::FineGrainedRecognition;
  tmpl.answer_format = AnswerFormat::MultipleChoice;
  tmpl.question_template = "What action does the {fencer} fencer perform?";
  tmpl.truth_slot = "action";
  tmpl.vocabulary = {"lunge", "fleche", "remise", "beat attack", "parry riposte"};
  tmpl.n_choices = 4;
  tmpl.seed = 7;
  return tmpl;
}

SourceRecord row(std::map<std::string, std::string> fields) { return SourceRecord{std::move(fields)}; }

QARecord make_qa(const std::string& qa_id, const std::string& video_id,
                 const std::string& dataset = "FencingDB") {
  QARecord qa;
  qa.qa_id = qa_id;
  qa.video_id = video_id;
  qa.source_dataset = dataset;
  qa.sport = "fencing";
  qa.question = "What happened?";
  qa.ground_truth = "lunge";
  return qa;
}

class FixedJudge final : public CotJudge {
 public:
  explicit FixedJudge(int score) : score_(score) {}
  JudgeVerdict judge(const QARecord&, const EpisodeRecord&) override {
    calls.fetch_add(1);
    return {score_, "fixed"};
  }
  std::atomic<int> calls{0};

 private:
  int score_;
};

class SequenceJudge final : public CotJudge {
 public:
  explicit SequenceJudge(std::vector<int> scores) : scores_(std::move(scores)) {}
  JudgeVerdict judge(const QARecord&, const EpisodeRecord&) override {
    const std::size_t i = cursor_.fetch_add(1);
    return {scores_.at(i), "sequence"};
  }

 private:
  std::vector<int> scores_;
  std::atomic<std::size_t> cursor_{0};
};

class DownJudge final : public CotJudge {
 public:
  JudgeVerdict judge(const QARecord&, const EpisodeRecord&) override {
    throw JudgeUnavailableError("judge endpoint unreachable; last failure: transport error");
  }
};

class DroppingPolicy final : public Policy {
 public:
  PolicyTurnResponse next_turn(const PolicyTurnRequest&) override {
    throw PolicyTransportError("giving up after 3 retries");
  }
};

VideoLookup stub_lookup() {
  return [](const std::string& video_id) -> VideoHandle {
    if (video_id == "missing") throw InputError("no manifest entry for video \"missing\"");
    return make_stub_video(video_id, 100);
  };
}

TeacherFactory answering_teacher(const std::string& answer) {
  return [answer](const QARecord&) {
    return scripted_policy({"<think>evidence is clear</think><answer>" + answer + "</answer>"});
  };
}

TeacherFactory malformed_teacher() {
  // No think block: the turn fails to parse, so the trajectory is invalid.
  return [](const QARecord&) { return scripted_policy({"<answer>lunge</answer>"}); };
}

std::map<Split, int> split_counts(const SplitPlan& plan) {
  std::map<Split, int> counts;
  for (const auto& kv : plan.assignment) counts[kv.second] += 1;
  return counts;
}

}  // namespace

TEST_SUITE("distill") {

TEST_CASE("mcq template output is frozen per record") {
  const TaskTemplate tmpl = action_template();
  const auto qa = apply_template(
      row({{"qa_id", "q1"}, {"video_id", "v1"}, {"fencer", "left"}, {"action", "lunge"}}), tmpl);

  CHECK(qa.qa_id == "q1");
  CHECK(qa.video_id == "v1");
  CHECK(qa.source_dataset == "FencingDB");
  CHECK(qa.sport == "fencing");
  CHECK(qa.task_dimension == TaskDimension::FineGrainedRecognition);
  CHECK(qa.answer_format == AnswerFormat::MultipleChoice);
  CHECK(qa.ground_truth == "lunge");
  CHECK(qa.question ==
        "What action does the left fencer perform?\n\n"
        "Options:\n- parry riposte\n- remise\n- lunge\n- fleche");

  // A different record draws an independent option order.
  const auto qa2 = apply_template(
      row({{"qa_id", "q2"}, {"video_id", "v1"}, {"fencer", "right"}, {"action", "remise"}}), tmpl);
  CHECK(qa2.question ==
        "What action does the right fencer perform?\n\n"
        "Options:\n- lunge\n- remise\n- parry riposte\n- beat attack");
}

TEST_CASE("template application is deterministic and order-independent") {
  const TaskTemplate tmpl = action_template();
  const auto r1 = row({{"qa_id", "q1"}, {"video_id", "v1"}, {"fencer", "left"}, {"action", "lunge"}});
  const auto r2 = row({{"qa_id", "q2"}, {"video_id", "v1"}, {"fencer", "right"}, {"action", "remise"}});

  const std::string first_q1 = apply_template(r1, tmpl).question;
  const std::string q2_between = apply_template(r2, tmpl).question;
  CHECK(apply_template(r1, tmpl).question == first_q1);
  CHECK(apply_template(r2, tmpl).question == q2_between);
}

TEST_CASE("open-ended templates substitute slots without options") {
  TaskTemplate tmpl = action_template();
  tmpl.answer_format = AnswerFormat::OpenEnded;
  tmpl.column_map = {{"fencer", "side"}};  // slot {fencer} reads column "side"

  const auto qa = apply_template(
      row({{"qa_id", "q1"}, {"video_id", "v1"}, {"side", "left"}, {"action", "lunge"}}), tmpl);
  CHECK(qa.question == "What action does the left fencer perform?");
  CHECK(qa.ground_truth == "lunge");
}

TEST_CASE("id columns are remappable and braces without slots stay literal") {
  TaskTemplate tmpl = action_template();
  tmpl.answer_format = AnswerFormat::OpenEnded;
  tmpl.qa_id_column = "id";
  tmpl.video_id_column = "clip";
  tmpl.question_template = "literal {not-a-slot and {fencer} stays";

  const auto qa = apply_template(
      row({{"id", "x9"}, {"clip", "c3"}, {"fencer", "left"}, {"action", "lunge"}}), tmpl);
  CHECK(qa.qa_id == "x9");
  CHECK(qa.video_id == "c3");
  CHECK(qa.question == "literal {not-a-slot and left stays");
}

TEST_CASE("missing columns name the slot that failed") {
  const TaskTemplate tmpl = action_template();
  CHECK_THROWS_WITH_AS(
      apply_template(row({{"qa_id", "q1"}, {"video_id", "v1"}, {"action", "lunge"}}), tmpl),
      "template slot {fencer}: source column \"fencer\" is missing", MissingSlotError);
  CHECK_THROWS_WITH_AS(
      apply_template(row({{"qa_id", "q1"}, {"video_id", "v1"}, {"fencer", "left"}}), tmpl),
      "truth slot {action}: source column \"action\" is missing", MissingSlotError);
  CHECK_THROWS_WITH_AS(
      apply_template(row({{"video_id", "v1"}, {"fencer", "left"}, {"action", "lunge"}}), tmpl),
      "qa id: source column \"qa_id\" is missing", MissingSlotError);
}

TEST_CASE("mcq templates need enough distinct distractors") {
  TaskTemplate tmpl = action_template();
  tmpl.vocabulary = {"lunge", "fleche", "fleche", "remise"};  // 2 distinct distractors
  CHECK_THROWS_AS(
      apply_template(
          row({{"qa_id", "q1"}, {"video_id", "v1"}, {"fencer", "left"}, {"action", "lunge"}}),
          tmpl),
      InputError);

  TaskTemplate degenerate = action_template();
  degenerate.n_choices = 1;
  CHECK_THROWS_AS(
      apply_template(
          row({{"qa_id", "q1"}, {"video_id", "v1"}, {"fencer", "left"}, {"action", "lunge"}}),
          degenerate),
      InputError);
}

TEST_CASE("registry keys templates by dataset and task") {
  TemplateRegistry registry;
  registry.register_template(action_template());
  CHECK(registry.size() == 1);

  CHECK_THROWS_WITH_AS(registry.register_template(action_template()),
                       "template already registered for (FencingDB, action_recognition)",
                       InputError);
  CHECK_THROWS_WITH_AS(registry.lookup("FencingDB", "judging"),
                       "no template for (FencingDB, judging)", UnknownTemplateError);

  const auto qa = registry.apply(
      "FencingDB", "action_recognition",
      row({{"qa_id", "q1"}, {"video_id", "v1"}, {"fencer", "left"}, {"action", "lunge"}}));
  CHECK(qa.qa_id == "q1");
}

TEST_CASE("task templates round-trip through json") {
  TaskTemplate tmpl = action_template();
  tmpl.column_map = {{"fencer", "side"}};
  const json j = tmpl;
  const auto back = j.get<TaskTemplate>();
  CHECK(json(back) == j);
  CHECK(back.vocabulary == tmpl.vocabulary);
  CHECK(back.column_map == tmpl.column_map);
  CHECK(back.seed == 7);

  json missing = j;
  missing.erase("truth_slot");
  CHECK_THROWS_AS(missing.get<TaskTemplate>(), InputError);
}

TEST_CASE("split names round-trip") {
  for (const Split split : {Split::TrainSft, Split::TrainRl, Split::Test})
    CHECK(split_from_string(to_string(split)) == split);
  CHECK_FALSE(split_from_string("validation").has_value());
}

TEST_CASE("split planning is seeded, exact, and video-granular") {
  std::vector<QARecord> records;
  for (int v = 0; v < 10; ++v)
    for (int q = 0; q < 3; ++q)
      records.push_back(make_qa("q" + std::to_string(v) + "_" + std::to_string(q),
                                "vid" + std::to_string(v)));

  const SplitRatios ratios{0.2, 0.6, 0.2};
  const SplitPlan plan = plan_splits(records, ratios, {}, 11);
  CHECK(plan.assignment.size() == 10);
  const auto counts = split_counts(plan);
  CHECK(counts.at(Split::TrainSft) == 2);
  CHECK(counts.at(Split::TrainRl) == 6);
  CHECK(counts.at(Split::Test) == 2);

  // Same seed, same plan; a different seed moves at least one video.
  const SplitPlan again = plan_splits(records, ratios, {}, 11);
  CHECK(again.assignment == plan.assignment);
  const SplitPlan other = plan_splits(records, ratios, {}, 12);
  CHECK(other.assignment != plan.assignment);

  // Every QA of a video lands in its video's split, in input order.
  for (const Split split : {Split::TrainSft, Split::TrainRl, Split::Test}) {
    const auto selected = select_records(records, plan, split);
    for (const QARecord& qa : selected) CHECK(plan.assignment.at(qa.video_id) == split);
  }
  const auto rl = select_records(records, plan, Split::TrainRl);
  CHECK(rl.size() == 18);
}

TEST_CASE("largest remainder assigns every video with the default ratios") {
  std::vector<QARecord> records;
  for (int v = 0; v < 50; ++v) records.push_back(make_qa("q" + std::to_string(v), "vid" + std::to_string(v)));
  const SplitPlan plan = plan_splits(records, SplitRatios{}, {}, 3);
  const auto counts = split_counts(plan);
  CHECK(counts.at(Split::TrainSft) == 9);   // 50 * 0.18
  CHECK(counts.at(Split::TrainRl) == 37);   // 50 * 0.74
  CHECK(counts.at(Split::Test) == 4);       // 50 * 0.08
}

TEST_CASE("split planning validates its inputs") {
  CHECK_THROWS_AS(plan_splits({}, SplitRatios{}, {}, 0), EmptyInputError);
  CHECK_THROWS_AS(plan_splits({make_qa("q", "v")}, SplitRatios{0.5, 0.5, 0.5}, {}, 0), InputError);
  CHECK_THROWS_AS(plan_splits({make_qa("q", "v")}, SplitRatios{-0.1, 1.0, 0.1}, {}, 0), InputError);
}

TEST_CASE("a shared video assigned to test is excluded everywhere") {
  // One video carrying QAs from both datasets of the overlap pair; with
  // ratios 0/0/1 it must land in test.
  std::vector<QARecord> records = {make_qa("qa_a", "shared_v", "A"), make_qa("qa_b", "shared_v", "B"),
                                   make_qa("qa_c", "clean_v", "A")};
  const SplitPlan plan = plan_splits(records, SplitRatios{0.0, 0.0, 1.0}, {{"A", "B"}}, 5);

  REQUIRE(plan.exclusions.size() == 1);
  CHECK(plan.exclusions[0].video_id == "shared_v");
  CHECK(plan.exclusions[0].reason.find("\"A\"") != std::string::npos);
  CHECK(plan.exclusions[0].reason.find("\"B\"") != std::string::npos);

  // The sacrificed video is gone from every pool, test included.
  for (const Split split : {Split::TrainSft, Split::TrainRl, Split::Test})
    for (const QARecord& qa : select_records(records, plan, split))
      CHECK(qa.video_id != "shared_v");
  CHECK(select_records(records, plan, Split::Test).size() == 1);
}

TEST_CASE("shared videos outside test carry no exclusion") {
  std::vector<QARecord> records = {make_qa("qa_a", "shared_v", "A"),
                                   make_qa("qa_b", "shared_v", "B")};
  const SplitPlan plan = plan_splits(records, SplitRatios{0.0, 1.0, 0.0}, {{"A", "B"}}, 5);
  CHECK(plan.exclusions.empty());
  CHECK(select_records(records, plan, Split::TrainRl).size() == 2);
}

TEST_CASE("overlap pairs that do not both touch a video are ignored") {
  std::vector<QARecord> records = {make_qa("qa_a", "v1", "A"), make_qa("qa_b", "v1", "C")};
  const SplitPlan plan = plan_splits(records, SplitRatios{0.0, 0.0, 1.0}, {{"A", "B"}}, 5);
  CHECK(plan.exclusions.empty());
}

TEST_CASE("split plans round-trip through json") {
  std::vector<QARecord> records = {make_qa("qa_a", "shared_v", "A"), make_qa("qa_b", "shared_v", "B"),
                                   make_qa("qa_c", "clean_v", "A")};
  const SplitPlan plan = plan_splits(records, SplitRatios{0.0, 0.0, 1.0}, {{"A", "B"}}, 5);
  const json j = plan;
  CHECK(j["schema_version"] == 1);
  const auto back = j.get<SplitPlan>();
  CHECK(back.assignment == plan.assignment);
  CHECK(back.seed == 5);
  REQUIRE(back.exclusions.size() == 1);
  CHECK(back.exclusions[0].video_id == "shared_v");

  json bad = j;
  bad["assignment"]["shared_v"] = "validation";
  CHECK_THROWS_AS(bad.get<SplitPlan>(), InputError);
}

TEST_CASE("retention needs both the format gate and the judge threshold") {
  const DistillConfig config;  // threshold 80

  FixedJudge high(88);
  auto outcome = distill_cot({make_qa("q1", "v1")}, answering_teacher("lunge"), stub_lookup(),
                             high, config);
  REQUIRE(outcome.samples.size() == 1);
  CHECK(outcome.samples[0].retained);
  CHECK(outcome.samples[0].judge_score == 88);
  CHECK(outcome.samples[0].judge_rationale == "fixed");

  FixedJudge boundary(80);
  outcome = distill_cot({make_qa("q1", "v1")}, answering_teacher("lunge"), stub_lookup(),
                        boundary, config);
  CHECK(outcome.samples[0].retained);  // threshold is inclusive

  FixedJudge low(60);
  outcome = distill_cot({make_qa("q1", "v1")}, answering_teacher("lunge"), stub_lookup(), low,
                        config);
  CHECK_FALSE(outcome.samples[0].retained);

  FixedJudge generous(95);
  outcome = distill_cot({make_qa("q1", "v1")}, malformed_teacher(), stub_lookup(), generous,
                        config);
  REQUIRE(outcome.samples.size() == 1);
  CHECK_FALSE(outcome.samples[0].retained);
  CHECK_FALSE(outcome.samples[0].trajectory.format_valid);
}

TEST_CASE("retained samples carry the full sft conversation") {
  FixedJudge judge(90);
  const auto outcome = distill_cot({make_qa("q1", "v1")}, answering_teacher("lunge"),
                                   stub_lookup(), judge, DistillConfig{});
  REQUIRE(outcome.samples.size() == 1);
  const auto& conversation = outcome.samples[0].conversation;
  REQUIRE(conversation.size() >= 3);
  CHECK(conversation[0].role == "system");
  CHECK(conversation[1].role == "user");
  CHECK(conversation.back().role == "assistant");

  const json j = outcome.samples[0];
  CHECK(j["schema_version"] == 1);
  CHECK(j["qa_id"] == "q1");
  CHECK(j["judge_score"] == 90);
  CHECK(j["retained"] == true);
  CHECK(j.contains("trajectory"));
  CHECK(j.contains("conversation"));
}

TEST_CASE("per-record failures are reported and the run continues") {
  FixedJudge judge(90);
  const std::vector<QARecord> records = {make_qa("q1", "v1"), make_qa("q2", "missing"),
                                         make_qa("q3", "v1")};
  const auto outcome = distill_cot(records, answering_teacher("lunge"), stub_lookup(), judge,
                                   DistillConfig{});
  REQUIRE(outcome.samples.size() == 2);
  CHECK(outcome.samples[0].qa_id == "q1");
  CHECK(outcome.samples[1].qa_id == "q3");
  REQUIRE(outcome.failures.size() == 1);
  CHECK(outcome.failures[0].qa_id == "q2");
  CHECK_FALSE(outcome.failures[0].transport);
  CHECK(outcome.failures[0].reason.find("missing") != std::string::npos);
}

TEST_CASE("endpoint failures are flagged as transport, bad input is not") {
  FixedJudge judge(90);
  const TeacherFactory dropping = [](const QARecord&) { return std::make_unique<DroppingPolicy>(); };
  auto outcome =
      distill_cot({make_qa("q1", "v1")}, dropping, stub_lookup(), judge, DistillConfig{});
  REQUIRE(outcome.failures.size() == 1);
  CHECK(outcome.failures[0].transport);

  DownJudge down;
  outcome = distill_cot({make_qa("q1", "v1")}, answering_teacher("lunge"), stub_lookup(), down,
                        DistillConfig{});
  REQUIRE(outcome.failures.size() == 1);
  CHECK(outcome.failures[0].transport);
}

TEST_CASE("attempts regenerate until a sample is retained") {
  DistillConfig config;
  config.attempts = 3;

  SequenceJudge improves({50, 90, 99});
  std::atomic<int> teachers{0};
  const TeacherFactory counting = [&teachers](const QARecord&) {
    teachers.fetch_add(1);
    return scripted_policy({"<think>look</think><answer>lunge</answer>"});
  };
  const auto outcome =
      distill_cot({make_qa("q1", "v1")}, counting, stub_lookup(), improves, config);
  REQUIRE(outcome.samples.size() == 1);
  CHECK(outcome.samples[0].retained);
  CHECK(outcome.samples[0].judge_score == 90);  // stopped at the first retained attempt
  CHECK(teachers.load() == 2);

  // All attempts below threshold: the last sample is kept, not retained.
  SequenceJudge stubborn({50, 55, 60});
  teachers.store(0);
  const auto failed =
      distill_cot({make_qa("q1", "v1")}, counting, stub_lookup(), stubborn, config);
  REQUIRE(failed.samples.size() == 1);
  CHECK_FALSE(failed.samples[0].retained);
  CHECK(failed.samples[0].judge_score == 60);
  CHECK(teachers.load() == 3);
}

TEST_CASE("parallel distillation preserves record order") {
  FixedJudge judge(90);
  std::vector<QARecord> records;
  for (int i = 0; i < 12; ++i) records.push_back(make_qa("q" + std::to_string(i), "v1"));
  DistillConfig config;
  config.jobs = 4;
  const auto outcome =
      distill_cot(records, answering_teacher("lunge"), stub_lookup(), judge, config);
  REQUIRE(outcome.samples.size() == 12);
  for (int i = 0; i < 12; ++i) CHECK(outcome.samples[static_cast<std::size_t>(i)].qa_id == "q" + std::to_string(i));
}

TEST_CASE("a shared teacher serves records serially") {
  auto teacher = scripted_policy({"<think>a</think><answer>lunge</answer>",
                                  "<think>b</think><answer>remise</answer>"});
  FixedJudge judge(90);
  const auto outcome = distill_cot({make_qa("q1", "v1"), make_qa("q2", "v1")}, *teacher,
                                   stub_lookup(), judge, DistillConfig{});
  REQUIRE(outcome.samples.size() == 2);
  CHECK(outcome.samples[0].qa_id == "q1");
  CHECK(outcome.samples[1].qa_id == "q2");
  CHECK(outcome.failures.empty());
}

}  // TEST_SUITE
