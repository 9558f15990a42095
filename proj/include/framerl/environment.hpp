#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "framerl/frames.hpp"
#include "framerl/policy.hpp"
#include "framerl/prompts.hpp"
#include "framerl/protocol.hpp"

namespace framerl {

// A video abstracted as an indexed frame store. Valid indices are exactly
// [0, frame_count - 1]. The frame source must be safe for concurrent reads.
struct VideoHandle {
  std::string video_id;
  std::int64_t frame_count = 0;
  std::function<FramePayload(std::int64_t)> frame_source;
};

// Video whose frames are deterministic stub tokens "frame_<idx>".
VideoHandle make_stub_video(std::string video_id, std::int64_t frame_count);

// Video whose frames reference "<uri>#<idx>" for image-bearing transports.
VideoHandle make_uri_video(std::string video_id, std::int64_t frame_count, std::string uri);

struct EpisodeConfig {
  int k_initial = 8;       // frames in the initial uniform context
  int k_per_call = 8;      // frames returned per tool call
  int max_tool_calls = 6;  // budget before the trajectory is format-invalid
  std::string system_prompt = kDefaultSystemPrompt;
};

// Uniform sampling grid over [0, n_frames - 1]: k indices at
// round(i * (n_frames - 1) / (k - 1)), round-half-up, deduplicated with
// order preserved when the video is shorter than k. k = 1 yields {0}.
std::vector<std::int64_t> uniform_indices(std::int64_t n_frames, int k);

// Same rounding rule applied inside a window clamped to [0, n_frames - 1];
// returns min(k, window width) indices. Throws EmptyWindowError when the
// clamped window is empty.
std::vector<std::int64_t> window_indices(std::int64_t n_frames, const FrameInterval& interval,
                                         int k);

// Initial uniform context over the whole video.
FrameSet initial_context(const VideoHandle& video, int k);

// Execute one frame-extraction tool call. Throws EmptyWindowError when the
// window lies entirely past the last frame; the episode loop converts that
// into a textual tool-error observation, not a format error.
FrameSet extract_frames(const VideoHandle& video, const FrameInterval& interval, int k);

// Observation text fed back to the policy when a tool call fails at runtime.
// The format is "TOOL_ERROR: <reason>" (documented in docs/protocol.md).
std::string tool_error_observation(const std::string& reason);

struct EpisodeRecord {
  Trajectory trajectory;
  std::int64_t frames_consumed = 0;         // |F_1| + sum of tool-call frame set sizes
  std::optional<std::string> answer;        // absent when the episode never answered
  std::vector<Message> conversation;        // full message history, for SFT emission
};

// Drive the multi-turn loop: seed the policy with the question and the
// initial context, then alternate policy turns, parsing, and tool execution
// until a terminal answer, a format error, or budget exhaustion. The
// returned trajectory always has its format gate evaluated.
// PolicyTransportError and ScriptExhaustedError propagate: an aborted
// episode must be excluded by the caller, never silently scored.
EpisodeRecord run_episode(const VideoHandle& video, const std::string& question, Policy& policy,
                          const EpisodeConfig& config);

}  // namespace framerl
