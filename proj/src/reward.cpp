#include "re2/reward.hpp"

#include <cmath>

namespace re2 {

OutcomeDistribution OutcomeDistribution::from_counts(int correct, int incorrect, int resolve) {
  OutcomeDistribution d;
  d.support = correct + incorrect + resolve;
  if (d.support <= 0) throw Error("outcome distribution needs a non-empty pool");
  d.p_correct = static_cast<double>(correct) / d.support;
  d.p_incorrect = static_cast<double>(incorrect) / d.support;
  d.p_resolve = static_cast<double>(resolve) / d.support;
  return d;
}

OutcomeDistribution out_of_group_distribution(std::span<const PrefixGroup> groups, int i) {
  if (groups.size() < 2) throw Error("out-of-group estimation needs n >= 2 groups");
  if (i < 0 || static_cast<std::size_t>(i) >= groups.size())
    throw Error("group index out of range");
  int c = 0, w = 0, r = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (g == static_cast<std::size_t>(i)) continue;
    for (const Continuation& cont : groups[g].continuations) {
      switch (cont.outcome.tag) {
        case OutcomeTag::correct: ++c; break;
        case OutcomeTag::incorrect: ++w; break;
        case OutcomeTag::resolve: ++r; break;
      }
    }
  }
  return OutcomeDistribution::from_counts(c, w, r);
}

double resolve_reward(const OutcomeDistribution& dist, int R) {
  if (R < 1) throw ConfigError("redo rounds R must be >= 1");
  if (dist.p_resolve >= 1.0) return 0.0;
  return dist.p_correct * (1.0 - std::pow(dist.p_resolve, R)) / (1.0 - dist.p_resolve);
}

RewardAssignment assign_rewards(std::span<const PrefixGroup> groups, int R, RewardMode mode) {
  RewardAssignment out;
  out.rewards.resize(groups.size());
  out.outcomes.resize(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& conts = groups[i].continuations;
    out.rewards[i].reserve(conts.size());
    out.outcomes[i].reserve(conts.size());
    // One distribution per group; lazily built since final answers never need it.
    bool have_dist = false;
    double resolve_r = 0.0;
    for (const Continuation& c : conts) {
      out.outcomes[i].push_back(c.outcome.tag);
      switch (c.outcome.tag) {
        case OutcomeTag::correct:
          out.rewards[i].push_back(1.0);
          break;
        case OutcomeTag::incorrect:
          out.rewards[i].push_back(0.0);
          break;
        case OutcomeTag::resolve:
          if (mode == RewardMode::binary_baseline) {
            out.rewards[i].push_back(0.0);
            break;
          }
          if (!have_dist) {
            resolve_r = resolve_reward(out_of_group_distribution(groups, static_cast<int>(i)), R);
            have_dist = true;
          }
          out.rewards[i].push_back(resolve_r);
          break;
      }
    }
  }
  return out;
}

}  // namespace re2
