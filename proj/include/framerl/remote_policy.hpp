#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "framerl/policy.hpp"
#include "framerl/transport.hpp"

namespace framerl {

struct DecodingParams {
  double temperature = 1.0;
  double top_p = 1.0;
  int max_tokens = 2048;
  std::optional<std::uint64_t> seed;
};

struct RemotePolicyConfig {
  std::string model_id;
  DecodingParams decoding;
  RetryPolicy retry;
  int max_in_flight = 4;
  std::string chat_path = "/v1/chat/completions";
  bool request_logprobs = false;
};

// Drives an OpenAI-style chat completions endpoint. Retries 429/5xx and
// transport drops with capped backoff; a 400 naming the context window maps
// to ContextOverflowError so callers can truncate or abort the episode; any
// other 4xx fails fast as PolicyTransportError.
class RemotePolicy final : public Policy {
 public:
  RemotePolicy(std::shared_ptr<ChatTransport> transport, RemotePolicyConfig config);
  ~RemotePolicy() override;

  PolicyTurnResponse next_turn(const PolicyTurnRequest& request) override;

  // Retries spent by the most recent completed call; diagnostic only, last
  // writer wins under concurrency.
  int last_turn_retries() const;

  // Wire shape, exposed so tests can pin it without a server. Frame parts
  // become an image_url entry preceded by a "frame_index: <i>" text entry;
  // stub payloads ride as stub:<token> urls. The tool role is folded into
  // user because chat endpoints reject tool turns that lack call ids.
  static nlohmann::json build_chat_request(const std::vector<Message>& conversation,
                                           const RemotePolicyConfig& config);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Convenience factory: plain-http transport to the endpoint, bearer token
// from FRAMERL_API_KEY when set.
std::unique_ptr<Policy> remote_policy(const std::string& endpoint, const std::string& model_id,
                                      const DecodingParams& decoding = {});

}  // namespace framerl
