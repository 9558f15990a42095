#pragma once

#include <memory>
#include <optional>
#include <semaphore>
#include <string>

#include "framerl/remote_policy.hpp"
#include "framerl/reward.hpp"
#include "framerl/transport.hpp"

namespace framerl {

struct JudgeVerdict {
  int score = 0;  // 0..100
  std::string rationale;
};

struct JudgeConfig {
  std::string model_id;
  std::string chat_path = "/v1/chat/completions";
  DecodingParams decoding{0.0, 1.0, 512, std::nullopt};  // greedy by default
  RetryPolicy retry;
  int max_in_flight = 4;
};

// Scores a candidate answer against a reference with a model behind a chat
// endpoint. An off-format verdict earns one reprompt; a second earns
// UnparseableVerdictError. Transport exhaustion maps to JudgeUnavailableError
// so batch callers can tell "judge down" from "judge confused".
class JudgeClient {
 public:
  JudgeClient(std::shared_ptr<ChatTransport> transport, JudgeConfig config);

  JudgeVerdict score(const std::string& rubric, const std::string& question,
                     const std::string& reference, const std::string& candidate);

  // Accepts "SCORE: 85", "score=85", or a reply that is just the integer.
  // Values outside 0..100 do not count as a verdict.
  static std::optional<int> parse_score(const std::string& text);

 private:
  std::string complete(const nlohmann::json& messages);

  std::shared_ptr<ChatTransport> transport_;
  JudgeConfig config_;
  std::counting_semaphore<1024> slots_;
};

// One-shot convenience over JudgeClient with the default retry policy.
// Bearer token from FRAMERL_JUDGE_API_KEY, falling back to FRAMERL_API_KEY.
JudgeVerdict judge_score(const std::string& question, const std::string& reference,
                         const std::string& candidate, const std::string& rubric,
                         const std::string& endpoint, const std::string& model_id);

// Adapts a judge verdict to the accuracy scale: acc = score / 100.
class JudgeAnswerScorer final : public AnswerScorer {
 public:
  JudgeAnswerScorer(std::shared_ptr<JudgeClient> judge, std::string rubric, std::string model_id);

  double score(const std::string& answer, const GroundTruth& truth) override;
  std::string id() const override { return "judge:" + model_id_; }

 private:
  std::shared_ptr<JudgeClient> judge_;
  std::string rubric_;
  std::string model_id_;
};

}  // namespace framerl
