#include "framerl/judge.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <thread>
#include <utility>

#include "framerl/errors.hpp"
#include "framerl/prompts.hpp"

namespace framerl {

namespace {

std::string lower_copy(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (const char c : text)
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

std::string trim(const std::string& text) {
  std::size_t lo = 0;
  std::size_t hi = text.size();
  while (lo < hi && std::isspace(static_cast<unsigned char>(text[lo]))) ++lo;
  while (hi > lo && std::isspace(static_cast<unsigned char>(text[hi - 1]))) --hi;
  return text.substr(lo, hi - lo);
}

std::string extract_rationale(const std::string& text) {
  const std::string lower = lower_copy(text);
  const std::size_t pos = lower.find("rationale");
  if (pos == std::string::npos) return trim(text);
  std::size_t start = pos + 9;
  while (start < text.size() &&
         (text[start] == ':' || std::isspace(static_cast<unsigned char>(text[start]))))
    ++start;
  return trim(text.substr(start));
}

std::optional<int> parse_int_0_100(const char* first, const char* last) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr == first) return std::nullopt;
  if (value < 0 || value > 100) return std::nullopt;
  return value;
}

}  // namespace

std::optional<int> JudgeClient::parse_score(const std::string& text) {
  const std::string lower = lower_copy(text);
  std::size_t pos = 0;
  while ((pos = lower.find("score", pos)) != std::string::npos) {
    std::size_t cursor = pos + 5;
    while (cursor < text.size() &&
           (text[cursor] == ':' || text[cursor] == '=' ||
            std::isspace(static_cast<unsigned char>(text[cursor]))))
      ++cursor;
    if (const auto value = parse_int_0_100(text.data() + cursor, text.data() + text.size()))
      return value;
    pos += 5;
  }
  const std::string bare = trim(text);
  if (!bare.empty()) return parse_int_0_100(bare.data(), bare.data() + bare.size());
  return std::nullopt;
}

JudgeClient::JudgeClient(std::shared_ptr<ChatTransport> transport, JudgeConfig config)
    : transport_(std::move(transport)),
      config_(std::move(config)),
      slots_(std::clamp(config_.max_in_flight, 1, 1024)) {
  if (!transport_) throw InputError("judge client needs a transport");
  if (config_.model_id.empty()) throw InputError("judge client needs a model id");
}

std::string JudgeClient::complete(const nlohmann::json& messages) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};

  const nlohmann::json request{{"model", config_.model_id},
                               {"messages", messages},
                               {"temperature", config_.decoding.temperature},
                               {"top_p", config_.decoding.top_p},
                               {"max_tokens", config_.decoding.max_tokens}};
  const std::string body = request.dump();

  TransportReply reply;
  for (int attempt = 0;; ++attempt) {
    reply = transport_->post_json(config_.chat_path, body);
    if (!reply.transport_failed() && !retryable_status(reply.status)) break;
    if (attempt >= config_.retry.max_retries) {
      const std::string cause = reply.transport_failed()
                                    ? "transport error: " + reply.error
                                    : "status " + std::to_string(reply.status);
      throw JudgeUnavailableError("judge endpoint unreachable; last failure: " + cause);
    }
    const int delay = config_.retry.delay_for_retry(attempt);
    if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
  }
  if (reply.status != 200)
    throw JudgeUnavailableError("judge endpoint replied with status " +
                                std::to_string(reply.status));

  const nlohmann::json parsed = nlohmann::json::parse(reply.body, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
      parsed["choices"].empty() || !parsed["choices"][0].contains("message") ||
      !parsed["choices"][0]["message"].contains("content") ||
      !parsed["choices"][0]["message"]["content"].is_string())
    throw JudgeUnavailableError("judge endpoint returned a malformed completion body");
  return parsed["choices"][0]["message"]["content"].get<std::string>();
}

JudgeVerdict JudgeClient::score(const std::string& rubric, const std::string& question,
                                const std::string& reference, const std::string& candidate) {
  const std::string task = "QUESTION:\n" + question + "\n\nREFERENCE ANSWER:\n" + reference +
                           "\n\nCANDIDATE ANSWER:\n" + candidate;
  nlohmann::json messages = nlohmann::json::array(
      {{{"role", "system"}, {"content", rubric}}, {{"role", "user"}, {"content", task}}});

  std::string reply = complete(messages);
  std::optional<int> parsed = parse_score(reply);
  if (!parsed) {
    messages.push_back({{"role", "assistant"}, {"content", reply}});
    messages.push_back({{"role", "user"}, {"content", std::string(kJudgeReprompt)}});
    reply = complete(messages);
    parsed = parse_score(reply);
    if (!parsed)
      throw UnparseableVerdictError("judge verdict had no score after reprompt: " +
                                    (reply.size() > 200 ? reply.substr(0, 200) + "..." : reply));
  }
  return JudgeVerdict{*parsed, extract_rationale(reply)};
}

JudgeAnswerScorer::JudgeAnswerScorer(std::shared_ptr<JudgeClient> judge, std::string rubric,
                                     std::string model_id)
    : judge_(std::move(judge)), rubric_(std::move(rubric)), model_id_(std::move(model_id)) {
  if (!judge_) throw InputError("judge scorer needs a judge client");
}

double JudgeAnswerScorer::score(const std::string& answer, const GroundTruth& truth) {
  const JudgeVerdict verdict = judge_->score(rubric_, truth.question, truth.text, answer);
  return static_cast<double>(verdict.score) / 100.0;
}

JudgeVerdict judge_score(const std::string& question, const std::string& reference,
                         const std::string& candidate, const std::string& rubric,
                         const std::string& endpoint, const std::string& model_id) {
  HttpOptions http;
  http.base_url = endpoint;
  if (const char* key = std::getenv("FRAMERL_JUDGE_API_KEY"))
    http.api_key = key;
  else if (const char* fallback = std::getenv("FRAMERL_API_KEY"))
    http.api_key = fallback;
  JudgeConfig config;
  config.model_id = model_id;
  JudgeClient client(std::shared_ptr<ChatTransport>(make_http_transport(std::move(http))),
                     std::move(config));
  return client.score(rubric, question, reference, candidate);
}

}  // namespace framerl
