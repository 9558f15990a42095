#include "framerl/remote_policy.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <semaphore>
#include <thread>
#include <utility>

#include "framerl/errors.hpp"

namespace framerl {

namespace {

std::string snippet(const std::string& body, std::size_t limit = 200) {
  if (body.size() <= limit) return body;
  return body.substr(0, limit) + "...";
}

bool mentions_context_window(const std::string& body) {
  std::string lower;
  lower.reserve(body.size());
  for (const char c : body)
    lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lower.find("context_length") != std::string::npos ||
         lower.find("context length") != std::string::npos ||
         lower.find("context window") != std::string::npos;
}

nlohmann::json part_to_wire(const MessagePart& part) {
  if (part.kind == MessagePart::Kind::Text) return {{"type", "text"}, {"text", part.text}};
  const FramePayload& payload = part.frame;
  const std::string url =
      payload.kind == PayloadKind::Stub ? "stub:" + payload.data : payload.data;
  return {{"type", "image_url"}, {"image_url", {{"url", url}}}};
}

}  // namespace

struct RemotePolicy::Impl {
  std::shared_ptr<ChatTransport> transport;
  RemotePolicyConfig config;
  std::counting_semaphore<1024> slots;
  std::atomic<int> last_retries{0};

  Impl(std::shared_ptr<ChatTransport> t, RemotePolicyConfig c)
      : transport(std::move(t)),
        config(std::move(c)),
        slots(std::clamp(config.max_in_flight, 1, 1024)) {}
};

RemotePolicy::RemotePolicy(std::shared_ptr<ChatTransport> transport, RemotePolicyConfig config)
    : impl_(std::make_unique<Impl>(std::move(transport), std::move(config))) {
  if (!impl_->transport) throw InputError("remote policy needs a transport");
  if (impl_->config.model_id.empty()) throw InputError("remote policy needs a model id");
}

RemotePolicy::~RemotePolicy() = default;

int RemotePolicy::last_turn_retries() const { return impl_->last_retries.load(); }

nlohmann::json RemotePolicy::build_chat_request(const std::vector<Message>& conversation,
                                                const RemotePolicyConfig& config) {
  nlohmann::json messages = nlohmann::json::array();
  for (const Message& msg : conversation) {
    nlohmann::json content = nlohmann::json::array();
    for (const MessagePart& part : msg.parts) {
      if (part.kind == MessagePart::Kind::Frame)
        content.push_back(
            {{"type", "text"}, {"text", "frame_index: " + std::to_string(part.frame_index)}});
      content.push_back(part_to_wire(part));
    }
    const std::string role = msg.role == "tool" ? "user" : msg.role;
    messages.push_back({{"role", role}, {"content", std::move(content)}});
  }

  nlohmann::json request{{"model", config.model_id},
                         {"messages", std::move(messages)},
                         {"temperature", config.decoding.temperature},
                         {"top_p", config.decoding.top_p},
                         {"max_tokens", config.decoding.max_tokens}};
  if (config.decoding.seed) request["seed"] = *config.decoding.seed;
  if (config.request_logprobs) request["logprobs"] = true;
  return request;
}

PolicyTurnResponse RemotePolicy::next_turn(const PolicyTurnRequest& request) {
  impl_->slots.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{impl_->slots};

  const std::string body = build_chat_request(request.conversation, impl_->config).dump();
  const RetryPolicy& retry = impl_->config.retry;

  TransportReply reply;
  int retries = 0;
  for (int attempt = 0;; ++attempt) {
    reply = impl_->transport->post_json(impl_->config.chat_path, body);
    if (!reply.transport_failed() && !retryable_status(reply.status)) break;
    if (attempt >= retry.max_retries) {
      impl_->last_retries.store(retries);
      const std::string cause = reply.transport_failed()
                                    ? "transport error: " + reply.error
                                    : "status " + std::to_string(reply.status);
      throw PolicyTransportError("giving up after " + std::to_string(retries) +
                                 " retries; last failure: " + cause);
    }
    ++retries;
    const int delay = retry.delay_for_retry(attempt);
    if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
  }
  impl_->last_retries.store(retries);

  if (reply.status == 400 && mentions_context_window(reply.body))
    throw ContextOverflowError("endpoint reports the context window is exceeded: " +
                               snippet(reply.body));
  if (reply.status != 200)
    throw PolicyTransportError("endpoint rejected request with status " +
                               std::to_string(reply.status) + ": " + snippet(reply.body));

  const nlohmann::json parsed = nlohmann::json::parse(reply.body, nullptr, false);
  if (parsed.is_discarded())
    throw PolicyTransportError("endpoint returned 200 with an unparseable body: " +
                               snippet(reply.body));
  const auto* content = [&]() -> const nlohmann::json* {
    if (!parsed.contains("choices") || !parsed["choices"].is_array() || parsed["choices"].empty())
      return nullptr;
    const auto& choice = parsed["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content") ||
        !choice["message"]["content"].is_string())
      return nullptr;
    return &choice["message"]["content"];
  }();
  if (!content)
    throw PolicyTransportError("completion body lacks choices[0].message.content: " +
                               snippet(reply.body));

  PolicyTurnResponse response;
  response.raw_text = content->get<std::string>();
  if (response.raw_text.empty())
    throw PolicyTransportError("endpoint returned an empty completion");

  const auto& choice = parsed["choices"][0];
  if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
      choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
    std::vector<double> logprobs;
    for (const auto& token : choice["logprobs"]["content"])
      if (token.contains("logprob") && token["logprob"].is_number())
        logprobs.push_back(token["logprob"].get<double>());
    if (!logprobs.empty()) response.logprobs = std::move(logprobs);
  }
  return response;
}

std::unique_ptr<Policy> remote_policy(const std::string& endpoint, const std::string& model_id,
                                      const DecodingParams& decoding) {
  HttpOptions http;
  http.base_url = endpoint;
  if (const char* key = std::getenv("FRAMERL_API_KEY")) http.api_key = key;
  RemotePolicyConfig config;
  config.model_id = model_id;
  config.decoding = decoding;
  return std::make_unique<RemotePolicy>(
      std::shared_ptr<ChatTransport>(make_http_transport(std::move(http))), std::move(config));
}

}  // namespace framerl
