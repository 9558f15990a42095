#include "framerl/reward.hpp"

#include <cctype>

#include "framerl/errors.hpp"

namespace framerl {

namespace {

bool leading_wrapper(char c) {
  return c == '(' || c == '[' || c == '{' || c == '"' || c == '\'';
}

bool trailing_wrapper(char c) {
  return c == ')' || c == ']' || c == '}' || c == '"' || c == '\'' || c == '.' || c == ',' ||
         c == ':' || c == ';' || c == '!' || c == '?';
}

bool ascii_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

void validate(const RewardConfig& config) {
  if (!(config.acc_gate_threshold > 0.0 && config.acc_gate_threshold <= 1.0))
    throw InputError("acc_gate_threshold must be in (0, 1]");
  if (config.tool_success_coeff < 0.0 || config.curiosity_bonus < 0.0 ||
      config.format_penalty < 0.0)
    throw InputError("reward coefficients must be >= 0");
}

std::string mcq_normalize(std::string_view text) {
  std::size_t lo = 0;
  std::size_t hi = text.size();
  while (lo < hi && (ascii_space(text[lo]) || leading_wrapper(text[lo]))) ++lo;
  while (hi > lo && (ascii_space(text[hi - 1]) || trailing_wrapper(text[hi - 1]))) --hi;

  std::string out;
  out.reserve(hi - lo);
  bool pending_space = false;
  for (std::size_t i = lo; i < hi; ++i) {
    const char c = text[i];
    if (ascii_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

double ExactMatchScorer::score(const std::string& answer, const GroundTruth& truth) {
  return mcq_normalize(answer) == mcq_normalize(truth.text) ? 1.0 : 0.0;
}

double NormalizedStringScorer::score(const std::string& answer, const GroundTruth& truth) {
  const auto squash = [](const std::string& text) {
    std::string out;
    bool pending_space = false;
    for (const char c : text) {
      if (ascii_space(c) || std::ispunct(static_cast<unsigned char>(c))) {
        pending_space = !out.empty();
        continue;
      }
      if (pending_space) {
        out.push_back(' ');
        pending_space = false;
      }
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
  };
  return squash(answer) == squash(truth.text) ? 1.0 : 0.0;
}

Gates compute_gates(const Trajectory& trajectory, const AccuracyScore& acc,
                    const RewardConfig& config) {
  validate(config);
  Gates gates;
  gates.g_tool = trajectory_uses_tool(trajectory);
  gates.g_acc = acc.value >= config.acc_gate_threshold;
  gates.g_fmt = trajectory.format_valid;
  return gates;
}

RewardBreakdown compose_reward(const Gates& gates, double acc, const RewardConfig& config) {
  validate(config);
  if (!(acc >= 0.0 && acc <= 1.0)) throw InputError("accuracy must be in [0, 1]");
  RewardBreakdown b;
  b.acc = acc;
  b.g_tool = gates.g_tool;
  b.g_acc = gates.g_acc;
  b.g_fmt = gates.g_fmt;
  if (gates.g_tool) b.r_tool = gates.g_acc ? config.tool_success_coeff * acc : config.curiosity_bonus;
  b.p_format = gates.g_fmt ? 0.0 : -config.format_penalty;
  b.total = (gates.g_fmt ? b.acc + b.r_tool : 0.0) + b.p_format;
  return b;
}

RewardBreakdown compute_reward(const Trajectory& trajectory, const AccuracyScore& acc,
                               const RewardConfig& config) {
  return compose_reward(compute_gates(trajectory, acc, config), acc.value, config);
}

AccuracyScore score_answer(const std::optional<std::string>& answer, const GroundTruth& reference,
                           AnswerScorer& scorer) {
  AccuracyScore result;
  result.scorer_id = scorer.id();
  if (!answer) return result;
  result.value = scorer.score(*answer, reference);
  if (!(result.value >= 0.0 && result.value <= 1.0))
    throw InputError("scorer " + result.scorer_id + " returned accuracy outside [0, 1]");
  return result;
}

}  // namespace framerl
