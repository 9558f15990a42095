#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "framerl/errors.hpp"
#include "framerl/judge.hpp"
#include "framerl/transport.hpp"

using namespace framerl;
using nlohmann::json;

namespace {

class FakeTransport final : public ChatTransport {
 public:
  explicit FakeTransport(std::vector<TransportReply> replies) : replies_(std::move(replies)) {}

  TransportReply post_json(const std::string&, const std::string& body) override {
    bodies.push_back(body);
    const std::size_t i = cursor_.fetch_add(1);
    return i < replies_.size() ? replies_[i] : replies_.back();
  }

  std::vector<std::string> bodies;

 private:
  std::vector<TransportReply> replies_;
  std::atomic<std::size_t> cursor_{0};
};

TransportReply completion(const std::string& text) {
  json body{{"choices", json::array({json{{"message", json{{"content", text}}}}})}};
  return TransportReply{200, body.dump(), ""};
}

JudgeConfig fast_config() {
  JudgeConfig config;
  config.model_id = "judge-model";
  config.retry.max_retries = 2;
  config.retry.base_delay_ms = 0;
  return config;
}

JudgeVerdict run_judge(std::shared_ptr<FakeTransport> transport) {
  JudgeClient client(transport, fast_config());
  return client.score("rubric text", "what happened?", "a lunge", "a fleche");
}

}  // namespace

TEST_SUITE("judge") {

TEST_CASE("score parsing accepts the documented verdict forms") {
  CHECK(JudgeClient::parse_score("SCORE: 85\nRATIONALE: close enough") == 85);
  CHECK(JudgeClient::parse_score("score=85") == 85);
  CHECK(JudgeClient::parse_score("Score:100") == 100);
  CHECK(JudgeClient::parse_score("  73  ") == 73);
  CHECK(JudgeClient::parse_score("0") == 0);
}

TEST_CASE("score parsing rejects out-of-range and scoreless text") {
  CHECK_FALSE(JudgeClient::parse_score("SCORE: 101").has_value());
  CHECK_FALSE(JudgeClient::parse_score("SCORE: -5").has_value());
  CHECK_FALSE(JudgeClient::parse_score("no verdict here").has_value());
  CHECK_FALSE(JudgeClient::parse_score("").has_value());
  CHECK_FALSE(JudgeClient::parse_score("score: high").has_value());
  // Prose between "score" and the integer does not count as a verdict.
  CHECK_FALSE(JudgeClient::parse_score("the score is 40").has_value());
  // A later parsable "score" mention still counts.
  CHECK(JudgeClient::parse_score("score: high\nfinal score: 60") == 60);
}

TEST_CASE("verdict carries the score and the rationale tail") {
  auto transport = std::make_shared<FakeTransport>(std::vector<TransportReply>{
      completion("SCORE: 85\nRATIONALE: same action, different name")});
  const auto verdict = run_judge(transport);
  CHECK(verdict.score == 85);
  CHECK(verdict.rationale == "same action, different name");

  // The request embeds the rubric as system and the QA triple as user text.
  const json request = json::parse(transport->bodies.at(0));
  CHECK(request["model"] == "judge-model");
  REQUIRE(request["messages"].size() == 2);
  CHECK(request["messages"][0]["role"] == "system");
  CHECK(request["messages"][0]["content"] == "rubric text");
  const std::string task = request["messages"][1]["content"].get<std::string>();
  CHECK(task.find("QUESTION:\nwhat happened?") != std::string::npos);
  CHECK(task.find("REFERENCE ANSWER:\na lunge") != std::string::npos);
  CHECK(task.find("CANDIDATE ANSWER:\na fleche") != std::string::npos);
}

TEST_CASE("an off-format reply earns exactly one reprompt") {
  auto transport = std::make_shared<FakeTransport>(std::vector<TransportReply>{
      completion("I think this deserves a high mark."), completion("SCORE: 70\nRATIONALE: ok")});
  const auto verdict = run_judge(transport);
  CHECK(verdict.score == 70);
  REQUIRE(transport->bodies.size() == 2);

  // The reprompt keeps the failed reply in context and appends the nudge.
  const json second = json::parse(transport->bodies.at(1));
  REQUIRE(second["messages"].size() == 4);
  CHECK(second["messages"][2]["role"] == "assistant");
  CHECK(second["messages"][3]["role"] == "user");
  const std::string nudge = second["messages"][3]["content"].get<std::string>();
  CHECK(nudge.find("did not contain a parsable score") != std::string::npos);
}

TEST_CASE("a second off-format reply is an unparseable verdict") {
  auto transport = std::make_shared<FakeTransport>(std::vector<TransportReply>{
      completion("no score"), completion("still no score")});
  CHECK_THROWS_AS(run_judge(transport), UnparseableVerdictError);
}

TEST_CASE("transport exhaustion maps to judge-unavailable, never a zero score") {
  auto transport = std::make_shared<FakeTransport>(
      std::vector<TransportReply>{TransportReply{0, "", "connection refused"}});
  CHECK_THROWS_AS(run_judge(transport), JudgeUnavailableError);

  auto hard_status = std::make_shared<FakeTransport>(
      std::vector<TransportReply>{TransportReply{503, "", ""}});
  CHECK_THROWS_AS(run_judge(hard_status), JudgeUnavailableError);

  auto malformed = std::make_shared<FakeTransport>(
      std::vector<TransportReply>{TransportReply{200, "not json", ""}});
  CHECK_THROWS_AS(run_judge(malformed), JudgeUnavailableError);
}

TEST_CASE("retryable judge failures are retried before giving up") {
  auto transport = std::make_shared<FakeTransport>(std::vector<TransportReply>{
      TransportReply{429, "", ""}, completion("SCORE: 55\nRATIONALE: x")});
  CHECK(run_judge(transport).score == 55);
  CHECK(transport->bodies.size() == 2);
}

TEST_CASE("judge answer scorer maps the verdict to the accuracy scale") {
  auto transport = std::make_shared<FakeTransport>(std::vector<TransportReply>{
      completion("SCORE: 73\nRATIONALE: partially right")});
  auto client = std::make_shared<JudgeClient>(transport, fast_config());
  JudgeAnswerScorer scorer(client, "rubric", "judge-model");
  CHECK(scorer.id() == "judge:judge-model");
  CHECK(scorer.score("a fleche", GroundTruth{"a lunge", "what happened?"}) == 0.73);
}

TEST_CASE("judge client rejects missing transport or model id") {
  CHECK_THROWS_AS(JudgeClient(nullptr, fast_config()), InputError);
  auto transport = std::make_shared<FakeTransport>(std::vector<TransportReply>{completion("x")});
  JudgeConfig config;  // model_id left empty
  CHECK_THROWS_AS(JudgeClient(transport, config), InputError);
}

}  // TEST_SUITE
