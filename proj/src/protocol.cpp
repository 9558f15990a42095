#include "framerl/protocol.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <sstream>

namespace framerl {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kToolOpen = "<tool_call>";
constexpr std::string_view kToolClose = "</tool_call>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";
constexpr std::string_view kToolName = "frame_extraction_tool";

struct Block {
  std::size_t open_pos = std::string_view::npos;  // position of the open tag
  std::size_t after_close = 0;                    // first char past the close tag
  std::string_view content;
  bool found = false;
};

Block find_block(std::string_view text, std::string_view open, std::string_view close,
                 std::size_t from = 0) {
  Block b;
  const std::size_t o = text.find(open, from);
  if (o == std::string_view::npos) return b;
  const std::size_t c = text.find(close, o + open.size());
  if (c == std::string_view::npos) return b;
  b.open_pos = o;
  b.after_close = c + close.size();
  b.content = text.substr(o + open.size(), c - (o + open.size()));
  b.found = true;
  return b;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_int(std::string_view s, std::int64_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

// Argument form: "35" or "idx_start=35" / "start=35". Returns the key ("" for
// positional) and whether the value parsed as an integer.
bool parse_argument(std::string_view arg, std::string& key, std::int64_t& value) {
  arg = trim(arg);
  const std::size_t eq = arg.find('=');
  if (eq == std::string_view::npos) {
    key.clear();
    return parse_int(arg, value);
  }
  key = std::string(trim(arg.substr(0, eq)));
  return parse_int(arg.substr(eq + 1), value);
}

TurnParse fail(TurnErrorCode code, std::string detail) {
  TurnParse out;
  out.error = TurnError{code, std::move(detail)};
  return out;
}

// Parses the inner text of a tool_call block. Accepted forms:
//   frame_extraction_tool(35, 59)
//   frame_extraction_tool(idx_start=35, idx_end=59)   (keys in either order)
// with arbitrary surrounding whitespace.
std::optional<TurnParse> parse_tool_call(std::string_view body, FrameInterval& out) {
  body = trim(body);
  if (body.substr(0, kToolName.size()) != kToolName)
    return fail(TurnErrorCode::MalformedToolCall, "unknown tool name");
  std::string_view rest = trim(body.substr(kToolName.size()));
  if (rest.empty() || rest.front() != '(' || rest.back() != ')')
    return fail(TurnErrorCode::MalformedToolCall, "expected parenthesized arguments");
  std::string_view args = rest.substr(1, rest.size() - 2);

  const std::size_t comma = args.find(',');
  if (comma == std::string_view::npos || args.find(',', comma + 1) != std::string_view::npos)
    return fail(TurnErrorCode::MalformedToolCall, "expected exactly two arguments");

  std::string key_a, key_b;
  std::int64_t val_a = 0, val_b = 0;
  if (!parse_argument(args.substr(0, comma), key_a, val_a) ||
      !parse_argument(args.substr(comma + 1), key_b, val_b))
    return fail(TurnErrorCode::MalformedToolCall, "arguments must be integers");

  std::int64_t start = 0, end = 0;
  if (key_a.empty() && key_b.empty()) {
    start = val_a;
    end = val_b;
  } else if (!key_a.empty() && !key_b.empty()) {
    const bool a_is_start = key_a == "idx_start" || key_a == "start";
    const bool a_is_end = key_a == "idx_end" || key_a == "end";
    const bool b_is_start = key_b == "idx_start" || key_b == "start";
    const bool b_is_end = key_b == "idx_end" || key_b == "end";
    if (a_is_start && b_is_end) {
      start = val_a;
      end = val_b;
    } else if (a_is_end && b_is_start) {
      start = val_b;
      end = val_a;
    } else {
      return fail(TurnErrorCode::MalformedToolCall, "unrecognized argument keywords");
    }
  } else {
    return fail(TurnErrorCode::MalformedToolCall, "mixed positional and keyword arguments");
  }

  if (start < 0 || end < 0)
    return fail(TurnErrorCode::MalformedToolCall, "frame indices must be >= 0");
  if (start > end)
    return fail(TurnErrorCode::MalformedToolCall, "inverted interval: start > end");
  out = FrameInterval{start, end};
  return std::nullopt;
}

}  // namespace

const char* to_string(TurnErrorCode code) {
  switch (code) {
    case TurnErrorCode::MissingThink: return "MissingThink";
    case TurnErrorCode::MissingAction: return "MissingAction";
    case TurnErrorCode::MalformedToolCall: return "MalformedToolCall";
    case TurnErrorCode::MultipleActions: return "MultipleActions";
  }
  return "UnknownTurnError";
}

TurnParse parse_turn(std::string_view raw) {
  const Block think = find_block(raw, kThinkOpen, kThinkClose);
  if (!think.found)
    return fail(TurnErrorCode::MissingThink, "no complete think block");
  if (think.content.find(kThinkOpen) != std::string_view::npos)
    return fail(TurnErrorCode::MissingThink, "nested think tag; no well-formed think block");

  // Action blocks are searched outside the think block, so thought text may
  // mention the tag syntax without affecting structure.
  const std::string_view before = raw.substr(0, think.open_pos);
  const std::string_view after = raw.substr(think.after_close);

  std::vector<std::pair<bool, std::string_view>> actions;  // (is_tool_call, content)
  for (const std::string_view segment : {before, after}) {
    std::size_t from = 0;
    for (;;) {
      const Block tool = find_block(segment, kToolOpen, kToolClose, from);
      const Block answer = find_block(segment, kAnswerOpen, kAnswerClose, from);
      if (!tool.found && !answer.found) break;
      // Take whichever block opens first to keep scanning deterministic.
      const bool tool_first = tool.found && (!answer.found || tool.open_pos < answer.open_pos);
      const Block& b = tool_first ? tool : answer;
      actions.emplace_back(tool_first, b.content);
      from = b.after_close;
    }
  }

  if (actions.empty())
    return fail(TurnErrorCode::MissingAction, "neither tool_call nor answer block");
  if (actions.size() > 1)
    return fail(TurnErrorCode::MultipleActions,
                std::to_string(actions.size()) + " action blocks present");

  TurnParse out;
  ParsedTurn turn;
  turn.thought.text = std::string(think.content);
  const auto& [is_tool, content] = actions.front();
  if (is_tool) {
    FrameInterval interval;
    if (auto err = parse_tool_call(content, interval)) return *err;
    turn.action = FrameExtraction{interval};
  } else {
    turn.action = OutputAnswer{std::string(content)};
  }
  out.turn = std::move(turn);
  return out;
}

std::string canonical_tool_call(const FrameInterval& interval) {
  std::ostringstream os;
  os << kToolName << "(" << interval.start << ", " << interval.end << ")";
  return os.str();
}

std::string serialize_turn(const Thought& thought, const Action& action) {
  std::string out;
  out += kThinkOpen;
  out += thought.text;
  out += kThinkClose;
  if (const auto* tool = std::get_if<FrameExtraction>(&action)) {
    out += kToolOpen;
    out += canonical_tool_call(tool->interval);
    out += kToolClose;
  } else {
    out += kAnswerOpen;
    out += std::get<OutputAnswer>(action).text;
    out += kAnswerClose;
  }
  return out;
}

bool trajectory_uses_tool(const Trajectory& traj) {
  return std::any_of(traj.steps.begin(), traj.steps.end(), [](const TrajStep& s) {
    return s.action && is_frame_extraction(*s.action);
  });
}

bool validate_trajectory(Trajectory& traj, int max_tool_calls) {
  traj.diagnostics.clear();
  auto flag = [&traj](std::string reason) { traj.diagnostics.push_back(std::move(reason)); };

  if (traj.steps.empty()) flag("empty trajectory");

  int tool_calls = 0;
  const FrameInterval* previous_interval = nullptr;
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const TrajStep& step = traj.steps[i];
    if (step.parse_error) {
      flag("step " + std::to_string(i) + ": " + to_string(step.parse_error->code) +
           (step.parse_error->detail.empty() ? "" : ": " + step.parse_error->detail));
      previous_interval = nullptr;
      continue;
    }
    if (!step.action) {
      flag("step " + std::to_string(i) + ": no action recorded");
      previous_interval = nullptr;
      continue;
    }
    if (const auto* tool = std::get_if<FrameExtraction>(&*step.action)) {
      ++tool_calls;
      if (previous_interval && *previous_interval == tool->interval)
        flag("step " + std::to_string(i) + " repeats the exact interval of the preceding action");
      previous_interval = &tool->interval;
    } else {
      previous_interval = nullptr;
      if (i + 1 != traj.steps.size())
        flag("step " + std::to_string(i) + ": answer is not the final action");
    }
  }

  if (tool_calls > max_tool_calls)
    flag("tool budget exceeded: " + std::to_string(tool_calls) + " calls, limit " +
         std::to_string(max_tool_calls));

  const bool answered = !traj.steps.empty() && traj.steps.back().action &&
                        is_output_answer(*traj.steps.back().action);
  if (!answered) flag("no terminal answer");

  traj.format_valid = traj.diagnostics.empty();
  return traj.format_valid;
}

}  // namespace framerl
