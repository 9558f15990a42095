#include "framerl/transport.hpp"

#include <algorithm>
#include <utility>

#include "httplib.h"

#include "framerl/errors.hpp"

namespace framerl {

namespace {

class HttpTransport final : public ChatTransport {
 public:
  explicit HttpTransport(HttpOptions options) : options_(std::move(options)) {
    if (options_.base_url.rfind("https://", 0) == 0)
      throw InputError("this build speaks plain http only; got " + options_.base_url);
    if (options_.base_url.rfind("http://", 0) != 0)
      throw InputError("base url must start with http://, got " + options_.base_url);
  }

  TransportReply post_json(const std::string& path, const std::string& body) override {
    // A client per call keeps this safe under concurrent use; connection
    // reuse is not worth sharing mutable socket state across threads.
    httplib::Client client(options_.base_url);
    client.set_connection_timeout(options_.connect_timeout_ms / 1000,
                                  (options_.connect_timeout_ms % 1000) * 1000);
    client.set_read_timeout(options_.read_timeout_ms / 1000,
                            (options_.read_timeout_ms % 1000) * 1000);
    client.set_write_timeout(options_.read_timeout_ms / 1000,
                             (options_.read_timeout_ms % 1000) * 1000);

    httplib::Headers headers;
    if (!options_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + options_.api_key);

    auto res = client.Post(path, headers, body, "application/json");
    TransportReply reply;
    if (!res) {
      reply.error = httplib::to_string(res.error());
      return reply;
    }
    reply.status = res->status;
    reply.body = res->body;
    return reply;
  }

 private:
  HttpOptions options_;
};

}  // namespace

std::unique_ptr<ChatTransport> make_http_transport(HttpOptions options) {
  return std::make_unique<HttpTransport>(std::move(options));
}

int RetryPolicy::delay_for_retry(int retry_index) const {
  if (base_delay_ms <= 0) return 0;
  long long delay = base_delay_ms;
  for (int i = 0; i < retry_index && delay < max_delay_ms; ++i) delay *= 2;
  return static_cast<int>(std::min<long long>(delay, max_delay_ms));
}

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status <= 599);
}

}  // namespace framerl
