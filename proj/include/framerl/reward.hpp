#pragma once

#include <optional>
#include <string>

#include "framerl/protocol.hpp"

namespace framerl {

// Reference answer for one question. The question rides along so scorers that
// need context (a judge model) can see it.
struct GroundTruth {
  std::string text;
  std::string question;
};

struct AccuracyScore {
  double value = 0.0;  // in [0, 1]
  std::string scorer_id;
};

struct RewardConfig {
  double acc_gate_threshold = 0.5;  // accuracy gate opens at >= threshold
  double tool_success_coeff = 0.5;  // tool bonus per unit accuracy once the gate is open
  double curiosity_bonus = 0.03;    // flat tool bonus when the answer missed
  double format_penalty = 0.05;     // paid (negated) by malformed trajectories
};

// Throws InputError unless all fields are >= 0 and the threshold is in (0, 1].
void validate(const RewardConfig& config);

struct Gates {
  bool g_tool = false;  // at least one frame-extraction action was parsed
  bool g_acc = false;   // acc >= threshold, boundary inclusive
  bool g_fmt = false;   // trajectory passed structural validation
};

struct RewardBreakdown {
  double acc = 0.0;
  bool g_tool = false;
  bool g_acc = false;
  bool g_fmt = false;
  double r_tool = 0.0;
  double p_format = 0.0;
  double total = 0.0;
};

// acc in [0, 1]. Implementations must be safe to call concurrently.
class AnswerScorer {
 public:
  virtual ~AnswerScorer() = default;
  virtual double score(const std::string& answer, const GroundTruth& truth) = 0;
  virtual std::string id() const = 0;
};

// Canonical answer form: trim, ASCII-lowercase, strip wrapping punctuation,
// collapse internal whitespace runs to one space. The full table is in
// docs/scoring.md.
std::string mcq_normalize(std::string_view text);

// Equality after mcq_normalize on both sides, so "b)" matches "B". Meant for
// closed-form answers: option letters or option texts.
class ExactMatchScorer final : public AnswerScorer {
 public:
  double score(const std::string& answer, const GroundTruth& truth) override;
  std::string id() const override { return "exact_match"; }
};

// Looser than exact_match: lowercases, drops every ASCII punctuation
// character, and collapses whitespace before comparing, so "12-10" matches
// "12 : 10". For short open-ended strings where the judge is overkill.
class NormalizedStringScorer final : public AnswerScorer {
 public:
  double score(const std::string& answer, const GroundTruth& truth) override;
  std::string id() const override { return "normalized_string"; }
};

Gates compute_gates(const Trajectory& trajectory, const AccuracyScore& acc,
                    const RewardConfig& config = {});

// Pure composition, no trajectory access:
//   r_tool   = tool_success_coeff * acc  if g_tool and g_acc
//              curiosity_bonus           if g_tool and not g_acc
//              0                         if not g_tool
//   p_format = -format_penalty * (1 - g_fmt)
//   total    = g_fmt * (acc + r_tool) + p_format
// so a malformed trajectory earns exactly -format_penalty regardless of its
// answer.
RewardBreakdown compose_reward(const Gates& gates, double acc, const RewardConfig& config = {});

// Derive gates from the trajectory and compose. Throws InputError when acc
// is outside [0, 1] or the config is invalid.
RewardBreakdown compute_reward(const Trajectory& trajectory, const AccuracyScore& acc,
                               const RewardConfig& config = {});

// Run one scorer. Judge-backed scorers may throw JudgeUnavailableError; the
// caller must defer the episode, never score it 0. Episodes that ended
// without an answer score 0 by the stated termination rule (pass
// std::nullopt).
AccuracyScore score_answer(const std::optional<std::string>& answer, const GroundTruth& reference,
                           AnswerScorer& scorer);

}  // namespace framerl
