#pragma once

#include <span>
#include <vector>

#include "re2/common.hpp"
#include "re2/env.hpp"
#include "re2/rollout.hpp"

namespace re2 {

// Empirical outcome frequencies over a completion pool. Probabilities are raw
// count ratios, no smoothing.
struct OutcomeDistribution {
  double p_correct = 0.0;
  double p_incorrect = 0.0;
  double p_resolve = 0.0;
  int support = 0;

  static OutcomeDistribution from_counts(int correct, int incorrect, int resolve);
};

// Frequencies over the (n-1)*m continuations of every group except i.
OutcomeDistribution out_of_group_distribution(std::span<const PrefixGroup> groups, int i);

// Expected accuracy of re-solving from scratch with at most R rounds:
// p_correct * (1 - p_resolve^R) / (1 - p_resolve), and 0 at p_resolve = 1
// (normalization forces p_correct = 0 there, so every branch of the limit
// gives 0).
double resolve_reward(const OutcomeDistribution& dist, int R);

enum class RewardMode { re2, binary_baseline };

struct RewardAssignment {
  std::vector<std::vector<double>> rewards;      // [group][continuation]
  std::vector<std::vector<OutcomeTag>> outcomes; // parallel to rewards
};

// re2 mode: correct -> 1, incorrect -> 0, resolve -> out-of-group resolve
// reward. binary mode: correct -> 1, everything else 0.
RewardAssignment assign_rewards(std::span<const PrefixGroup> groups, int R, RewardMode mode);

}  // namespace re2
