#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace framerl {

// Frame payloads are opaque to the engine. Stub payloads let the whole loop
// run without any video decoder; ImageRef payloads carry a URI for real
// endpoints to fetch or embed.
enum class PayloadKind { Stub, ImageRef };

struct FramePayload {
  PayloadKind kind = PayloadKind::Stub;
  std::string data;  // stub token ("frame_<idx>") or image URI
};

struct FrameEntry {
  std::int64_t index = 0;
  FramePayload payload;
};

// Ordered set of frames handed to the policy, indices strictly increasing.
// Every entry carries its absolute frame index so the model can refer back
// to positions in the source video.
struct FrameSet {
  std::vector<FrameEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }

  std::vector<std::int64_t> indices() const {
    std::vector<std::int64_t> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.index);
    return out;
  }
};

}  // namespace framerl
