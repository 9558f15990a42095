#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "framerl/frames.hpp"

namespace framerl {

// One piece of message content: plain text or a frame. Frames keep their
// absolute index visible; transports decide how the payload travels.
struct MessagePart {
  enum class Kind { Text, Frame };

  Kind kind = Kind::Text;
  std::string text;              // Kind::Text
  std::int64_t frame_index = -1; // Kind::Frame
  FramePayload frame;            // Kind::Frame
};

inline MessagePart text_part(std::string text) {
  MessagePart p;
  p.kind = MessagePart::Kind::Text;
  p.text = std::move(text);
  return p;
}

inline MessagePart frame_part(const FrameEntry& entry) {
  MessagePart p;
  p.kind = MessagePart::Kind::Frame;
  p.frame_index = entry.index;
  p.frame = entry.payload;
  return p;
}

// Roles follow chat conventions: "system", "user", "assistant", "tool".
struct Message {
  std::string role;
  std::vector<MessagePart> parts;
};

// Full conversation so far, oldest message first. Frame observations appear
// in the order the frames were provided.
struct PolicyTurnRequest {
  std::vector<Message> conversation;
};

struct PolicyTurnResponse {
  std::string raw_text;
  std::optional<std::vector<double>> logprobs;  // per sampled token, when the backend offers them
};

// A policy produces one raw turn of text given the conversation so far.
// Implementations: scripted (tests/fixtures), replay (logged trajectories),
// remote (chat-completions endpoint).
class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyTurnResponse next_turn(const PolicyTurnRequest& request) = 0;
};

// Emits a fixed sequence of turns, ignoring observations. Throws
// ScriptExhaustedError once the script runs out.
std::unique_ptr<Policy> scripted_policy(std::vector<std::string> turns);

}  // namespace framerl
