#include "framerl/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "framerl/errors.hpp"

namespace framerl {

AdvantageSet compute_advantages(const std::vector<double>& rewards, const GrpoConfig& config) {
  const std::size_t g = rewards.size();
  if (g < 2)
    throw GroupTooSmallError("advantage normalization needs at least 2 rollouts, got " +
                             std::to_string(g));
  const double n = static_cast<double>(g);

  double sum = 0.0;
  for (const double r : rewards) sum += r;
  const double mean = sum / n;

  // Recentered second pass: folding the residual of the first pass into the
  // shift pins the advantage mean to machine zero and makes all-equal groups
  // cancel exactly.
  double resid = 0.0;
  for (const double r : rewards) resid += r - mean;
  const double shift = mean + resid / n;

  double ss = 0.0;
  for (const double r : rewards) {
    const double d = r - shift;
    ss += d * d;
  }
  const double stddev = std::sqrt(ss / n);

  AdvantageSet out;
  out.mean_r = mean;
  out.std_r = stddev;
  out.degenerate = stddev <= config.std_floor;
  const double denom = std::max(stddev, config.std_floor);
  out.advantages.resize(g);
  for (std::size_t i = 0; i < g; ++i) out.advantages[i] = (rewards[i] - shift) / denom;
  return out;
}

double objective_value(const RolloutGroup& group, const AdvantageSet& advantages,
                       const GrpoConfig& config) {
  if (!(config.clip_epsilon > 0.0 && config.clip_epsilon < 1.0))
    throw InputError("clip_epsilon must be in (0, 1)");
  if (config.kl_coeff < 0.0) throw InputError("kl_coeff must be >= 0");
  if (group.ratios.empty()) throw EmptyInputError("objective over an empty group");
  if (group.ratios.size() != advantages.advantages.size() ||
      group.rewards.size() != group.ratios.size())
    throw DimensionMismatchError("group of " + std::to_string(group.rewards.size()) +
                                 " rewards, " + std::to_string(group.ratios.size()) +
                                 " ratios, and " + std::to_string(advantages.advantages.size()) +
                                 " advantages");
  if (group.kl_to_ref < 0.0) throw InputError("kl_to_ref must be >= 0");

  const double lo = 1.0 - config.clip_epsilon;
  const double hi = 1.0 + config.clip_epsilon;
  double acc = 0.0;
  for (std::size_t i = 0; i < group.ratios.size(); ++i) {
    const double ratio = group.ratios[i];
    if (!(ratio > 0.0)) throw InputError("ratios must be > 0");
    const double a = advantages.advantages[i];
    acc += std::min(ratio * a, std::clamp(ratio, lo, hi) * a);
  }
  return acc / static_cast<double>(group.ratios.size()) - config.kl_coeff * group.kl_to_ref;
}

double kl_estimate(const std::vector<double>& logp_theta, const std::vector<double>& logp_ref) {
  if (logp_theta.empty()) throw EmptyInputError("kl estimate over empty sequences");
  if (logp_theta.size() != logp_ref.size())
    throw DimensionMismatchError("got " + std::to_string(logp_theta.size()) +
                                 " policy logprobs but " + std::to_string(logp_ref.size()) +
                                 " reference logprobs");
  double acc = 0.0;
  for (std::size_t i = 0; i < logp_theta.size(); ++i) {
    const double d = logp_ref[i] - logp_theta[i];
    // expm1 keeps the term exact near d = 0, where exp(d) - d - 1 cancels.
    acc += std::max(0.0, std::expm1(d) - d);
  }
  return acc / static_cast<double>(logp_theta.size());
}

}  // namespace framerl
