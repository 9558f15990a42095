#include "framerl/environment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "framerl/errors.hpp"

namespace framerl {

namespace {

// Round-half-up grid over [lo, hi] inclusive. Stated rounding keeps golden
// fixtures portable across platforms.
std::vector<std::int64_t> grid(std::int64_t lo, std::int64_t hi, int k) {
  std::vector<std::int64_t> out;
  if (k <= 0 || hi < lo) return out;
  if (k == 1) {
    out.push_back(lo);
    return out;
  }
  out.reserve(static_cast<std::size_t>(k));
  const double span = static_cast<double>(hi - lo);
  const double denom = static_cast<double>(k - 1);
  for (int i = 0; i < k; ++i) {
    const double x = static_cast<double>(lo) + static_cast<double>(i) * span / denom;
    std::int64_t idx = static_cast<std::int64_t>(std::floor(x + 0.5));
    idx = std::clamp(idx, lo, hi);
    if (out.empty() || out.back() != idx) out.push_back(idx);  // dedupe, order preserved
  }
  return out;
}

FrameSet fetch(const VideoHandle& video, const std::vector<std::int64_t>& indices) {
  FrameSet set;
  set.entries.reserve(indices.size());
  for (const std::int64_t idx : indices)
    set.entries.push_back(FrameEntry{idx, video.frame_source(idx)});
  return set;
}

Message frame_observation(const std::string& lead, const FrameSet& frames) {
  Message msg;
  msg.role = "tool";
  if (!lead.empty()) msg.parts.push_back(text_part(lead));
  for (const auto& entry : frames.entries) msg.parts.push_back(frame_part(entry));
  return msg;
}

}  // namespace

VideoHandle make_stub_video(std::string video_id, std::int64_t frame_count) {
  VideoHandle v;
  v.video_id = std::move(video_id);
  v.frame_count = frame_count;
  v.frame_source = [](std::int64_t idx) {
    return FramePayload{PayloadKind::Stub, "frame_" + std::to_string(idx)};
  };
  return v;
}

VideoHandle make_uri_video(std::string video_id, std::int64_t frame_count, std::string uri) {
  VideoHandle v;
  v.video_id = std::move(video_id);
  v.frame_count = frame_count;
  v.frame_source = [uri = std::move(uri)](std::int64_t idx) {
    return FramePayload{PayloadKind::ImageRef, uri + "#" + std::to_string(idx)};
  };
  return v;
}

std::vector<std::int64_t> uniform_indices(std::int64_t n_frames, int k) {
  if (n_frames < 1) throw InputError("video has no frames");
  if (k < 1) throw InputError("k must be >= 1");
  return grid(0, n_frames - 1, k);
}

std::vector<std::int64_t> window_indices(std::int64_t n_frames, const FrameInterval& interval,
                                         int k) {
  if (n_frames < 1) throw InputError("video has no frames");
  if (k < 1) throw InputError("k must be >= 1");
  const std::int64_t lo = std::max<std::int64_t>(interval.start, 0);
  const std::int64_t hi = std::min<std::int64_t>(interval.end, n_frames - 1);
  if (lo > hi) {
    std::ostringstream os;
    os << "empty window: requested [" << interval.start << ", " << interval.end
       << "] but valid indices are [0, " << n_frames - 1 << "]";
    throw EmptyWindowError(os.str());
  }
  const std::int64_t width = hi - lo + 1;
  const int m = static_cast<int>(std::min<std::int64_t>(k, width));
  return grid(lo, hi, m);
}

FrameSet initial_context(const VideoHandle& video, int k) {
  return fetch(video, uniform_indices(video.frame_count, k));
}

FrameSet extract_frames(const VideoHandle& video, const FrameInterval& interval, int k) {
  return fetch(video, window_indices(video.frame_count, interval, k));
}

std::string tool_error_observation(const std::string& reason) {
  return "TOOL_ERROR: " + reason;
}

EpisodeRecord run_episode(const VideoHandle& video, const std::string& question, Policy& policy,
                          const EpisodeConfig& config) {
  EpisodeRecord record;

  Message system;
  system.role = "system";
  system.parts.push_back(text_part(config.system_prompt));
  record.conversation.push_back(std::move(system));

  FrameSet current = initial_context(video, config.k_initial);
  record.frames_consumed += static_cast<std::int64_t>(current.size());

  Message opening;
  opening.role = "user";
  opening.parts.push_back(text_part(question));
  for (const auto& entry : current.entries) opening.parts.push_back(frame_part(entry));
  record.conversation.push_back(std::move(opening));

  int tool_calls = 0;
  bool done = false;
  while (!done) {
    PolicyTurnRequest request{record.conversation};
    PolicyTurnResponse response = policy.next_turn(request);

    Message assistant;
    assistant.role = "assistant";
    assistant.parts.push_back(text_part(response.raw_text));
    record.conversation.push_back(std::move(assistant));

    TrajStep step;
    step.frames = current;
    step.raw_text = response.raw_text;
    TurnParse parsed = parse_turn(response.raw_text);
    if (!parsed.ok()) {
      step.parse_error = parsed.error;
      record.trajectory.steps.push_back(std::move(step));
      break;  // a format error terminates the episode
    }
    step.thought = parsed.turn->thought;
    step.action = parsed.turn->action;

    if (const auto* answer = std::get_if<OutputAnswer>(&parsed.turn->action)) {
      record.answer = answer->text;
      record.trajectory.steps.push_back(std::move(step));
      done = true;
      continue;
    }

    const FrameInterval interval = std::get<FrameExtraction>(parsed.turn->action).interval;

    // Redundant exploration: the exact window of the immediately preceding
    // action invalidates the trajectory, so there is nothing left to learn
    // from continuing the episode.
    const TrajStep* prev = record.trajectory.steps.empty() ? nullptr : &record.trajectory.steps.back();
    const bool repeats_previous =
        prev && prev->action && is_frame_extraction(*prev->action) &&
        std::get<FrameExtraction>(*prev->action).interval == interval;
    record.trajectory.steps.push_back(std::move(step));
    if (repeats_previous) break;

    ++tool_calls;
    if (tool_calls > config.max_tool_calls) break;  // over budget, format-invalid

    FrameSet next;
    std::string observation_lead;
    try {
      next = extract_frames(video, interval, config.k_per_call);
      record.frames_consumed += static_cast<std::int64_t>(next.size());
    } catch (const EmptyWindowError& e) {
      observation_lead = tool_error_observation(e.what());
    }
    record.conversation.push_back(frame_observation(observation_lead, next));
    current = std::move(next);
  }

  validate_trajectory(record.trajectory, config.max_tool_calls);
  return record;
}

}  // namespace framerl
