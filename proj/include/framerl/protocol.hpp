#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "framerl/frames.hpp"

namespace framerl {

// Free-text reasoning emitted between the think tags. Well-formed thought
// text contains no think tags of its own.
struct Thought {
  std::string text;

  friend bool operator==(const Thought&, const Thought&) = default;
};

// Inclusive frame-index window [start, end], both >= 0 and start <= end for
// a format-valid call. Out-of-range windows are a runtime concern, not a
// format one; the environment clamps them.
struct FrameInterval {
  std::int64_t start = 0;
  std::int64_t end = 0;

  friend bool operator==(const FrameInterval&, const FrameInterval&) = default;
};

struct FrameExtraction {
  FrameInterval interval;

  friend bool operator==(const FrameExtraction&, const FrameExtraction&) = default;
};

struct OutputAnswer {
  std::string text;

  friend bool operator==(const OutputAnswer&, const OutputAnswer&) = default;
};

// The two-action space: an iterative tool call or a terminal answer.
using Action = std::variant<FrameExtraction, OutputAnswer>;

inline bool is_frame_extraction(const Action& a) { return std::holds_alternative<FrameExtraction>(a); }
inline bool is_output_answer(const Action& a) { return std::holds_alternative<OutputAnswer>(a); }

enum class TurnErrorCode {
  MissingThink,      // no well-formed think block
  MissingAction,     // neither tool_call nor answer block
  MalformedToolCall, // unparseable arguments, non-integer or negative indices, inverted interval
  MultipleActions,   // more than one action block present
};

const char* to_string(TurnErrorCode code);

struct TurnError {
  TurnErrorCode code = TurnErrorCode::MissingThink;
  std::string detail;
};

struct ParsedTurn {
  Thought thought;
  Action action;
};

// Result of parsing one raw model turn. Exactly one of turn/error is set.
struct TurnParse {
  std::optional<ParsedTurn> turn;
  std::optional<TurnError> error;

  bool ok() const { return turn.has_value(); }
};

// Parse one raw turn into (thought, action). Never throws: every failure is
// reported as a TurnError, and every TurnError makes the turn format-invalid.
// The grammar is documented in docs/protocol.md. Readers are tolerant
// (stray text outside tags is ignored, tool-call arguments may be positional
// or keyworded); the writer below is strict.
TurnParse parse_turn(std::string_view raw);

// Canonical serialized form: think block first, then exactly one action
// block, positional tool-call arguments. parse_turn(serialize_turn(t, a))
// recovers (t, a) for any well-formed thought/action.
std::string serialize_turn(const Thought& thought, const Action& action);

// Canonical inner text of a tool call, e.g. "frame_extraction_tool(35, 59)".
std::string canonical_tool_call(const FrameInterval& interval);

// One step of a trajectory: the frames visible when the policy produced the
// turn, the raw turn text, and its parse. A failed parse leaves action empty
// and records the error; such trajectories stay representable so they can be
// validated and penalized.
struct TrajStep {
  FrameSet frames;
  std::string raw_text;
  Thought thought;
  std::optional<Action> action;
  std::optional<TurnError> parse_error;
};

struct Trajectory {
  std::vector<TrajStep> steps;
  bool format_valid = false;
  std::vector<std::string> diagnostics;
};

// Evaluate the format gate over an assembled trajectory. Returns true iff
//   - every turn parsed cleanly,
//   - no frame-extraction action repeats the exact interval of the
//     immediately preceding action (strictly consecutive rule),
//   - at most max_tool_calls frame extractions occur, and
//   - the trajectory terminates with a single final answer.
// Sets traj.format_valid and appends one diagnostic per violated rule.
bool validate_trajectory(Trajectory& traj, int max_tool_calls);

// True iff the trajectory contains at least one frame-extraction action.
bool trajectory_uses_tool(const Trajectory& traj);

}  // namespace framerl
