#pragma once

#include <string>
#include <vector>

namespace framerl {

struct GrpoConfig {
  double clip_epsilon = 0.2;  // must be in (0, 1)
  double kl_coeff = 0.01;     // must be >= 0
  // Denominator floor for advantage normalization: dividing by
  // max(std, std_floor) keeps all-equal groups at zero advantages instead of
  // erroring.
  double std_floor = 1e-6;
};

// One prompt's worth of scored rollouts. ratios are sequence-level
// importance ratios supplied by the caller; kl_to_ref is a caller-precomputed
// KL estimate (see kl_estimate for the shipped estimator).
struct RolloutGroup {
  std::string prompt_id;
  std::vector<double> rewards;
  std::vector<double> ratios;
  double kl_to_ref = 0.0;
};

struct AdvantageSet {
  std::vector<double> advantages;
  double mean_r = 0.0;
  double std_r = 0.0;      // population std, reported even when degenerate
  bool degenerate = false;  // std_r <= std_floor; advantages are all zero then
};

// Per-group z-score normalization: A_i = (r_i - mean) / max(std, std_floor),
// population std (divide by G, not G-1). Throws GroupTooSmallError below two
// rollouts. When std_r > std_floor the output has mean ~0 and population std
// ~1 at machine precision; all-equal groups come out exactly zero.
AdvantageSet compute_advantages(const std::vector<double>& rewards, const GrpoConfig& config = {});

// Clipped surrogate averaged over the group, minus kl_coeff * kl_to_ref:
//   (1/G) sum_i min(ratio_i * A_i, clip(ratio_i, 1-eps, 1+eps) * A_i)
//     - kl_coeff * kl_to_ref
// Throws DimensionMismatchError when the group and advantage shapes disagree,
// EmptyInputError on an empty group, InputError on non-positive ratios,
// negative kl_to_ref, or an out-of-range config.
double objective_value(const RolloutGroup& group, const AdvantageSet& advantages,
                       const GrpoConfig& config = {});

// Per-token estimator mean(exp(d) - d - 1) with d = logp_ref - logp_theta.
// Each term is non-negative, so the estimate is too; zero when the sequences
// agree. Throws EmptyInputError / DimensionMismatchError.
double kl_estimate(const std::vector<double>& logp_theta, const std::vector<double>& logp_ref);

}  // namespace framerl
