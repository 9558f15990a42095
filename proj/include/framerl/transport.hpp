#pragma once

#include <memory>
#include <string>

namespace framerl {

// Outcome of one JSON POST. status 0 means the request never completed and
// error says why; otherwise status/body are the server's reply verbatim.
struct TransportReply {
  int status = 0;
  std::string body;
  std::string error;
  bool transport_failed() const { return status == 0; }
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  // Must be safe to call from multiple threads.
  virtual TransportReply post_json(const std::string& path, const std::string& body) = 0;
};

struct HttpOptions {
  std::string base_url;  // scheme://host[:port], plain http in this build
  std::string api_key;   // sent as a bearer token when non-empty
  int connect_timeout_ms = 10000;
  int read_timeout_ms = 120000;
};

// Throws InputError for URLs this build cannot speak (https without TLS).
std::unique_ptr<ChatTransport> make_http_transport(HttpOptions options);

struct RetryPolicy {
  int max_retries = 3;  // attempts beyond the first
  int base_delay_ms = 250;
  int max_delay_ms = 4000;
  // Exponential, capped, no jitter: replayable timing matters more here than
  // herd avoidance.
  int delay_for_retry(int retry_index) const;
};

// 429 and any 5xx are worth retrying; other statuses are the caller's problem.
bool retryable_status(int status);

}  // namespace framerl
