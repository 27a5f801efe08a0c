#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "re2/common.hpp"
#include "re2/env.hpp"
#include "re2/policy.hpp"
#include "re2/reward.hpp"
#include "re2/rollout.hpp"

namespace re2 {

enum class TrainMode { re2, dapo_baseline };

const char* train_mode_name(TrainMode mode);
TrainMode train_mode_from_name(const std::string& name);

struct TrainConfig {
  double learning_rate = 0.1;  // tabular scale; the 1e-6 default targets LLM-sized nets
  int batch_queries = 32;
  int n = 8;
  int m = 8;
  int R = 5;
  double eps_low = 0.2;
  double eps_high = 0.28;
  int mu = 1;  // inner ascent iterations per batch
  int max_steps = 100;
  TrainMode mode = TrainMode::re2;
  int baseline_batch_queries = 128;
  int baseline_samples = 20;
  bool baseline_mask_resolve = true;
  double resolve_logit_init = -2.0;
  int checkpoint_every = 0;  // 0 = final only

  void validate() const;
};

struct DegenerateBreakdown {
  int all_correct = 0;
  int all_incorrect = 0;
  int all_resolve = 0;
};

struct AdvantageTable {
  // advantages[i] is empty for degenerate groups; otherwise one value per
  // continuation with group mean 0 and population std 1.
  std::vector<std::vector<double>> advantages;
  std::vector<bool> degenerate;
  DegenerateBreakdown breakdown;

  int group_count() const { return static_cast<int>(degenerate.size()); }
  int degenerate_count() const;
};

// Group-wise normalization (reward minus group mean over population std).
// Zero-std groups are marked degenerate and carry no advantages.
AdvantageTable compute_advantages(const RewardAssignment& rewards, int m);

// Clipped surrogate over one query's prefix groups:
//   (1/(nm)) sum_i sum_j (1/|O_ij|) sum_t min(rho*A, clip(rho, 1-el, 1+eh)*A)
// with rho the live/behavior probability ratio per token. Degenerate groups
// contribute exactly zero. Throws StaleBatchError when a recorded behavior
// log-prob no longer matches the snapshot.
double surrogate_objective(const Policy& live, const PolicySnapshot& snap,
                           std::span<const PrefixGroup> groups, const AdvantageTable& adv,
                           double eps_low, double eps_high);

struct SurrogateEval {
  double objective = 0.0;
  std::vector<double> gradient;  // d objective / d live logits, flat layout
};
SurrogateEval surrogate_eval(const Policy& live, const PolicySnapshot& snap,
                             std::span<const PrefixGroup> groups, const AdvantageTable& adv,
                             double eps_low, double eps_high);

// Per-step metrics, one JSONL record each.
struct StepMetrics {
  int step = 0;
  double mean_reward = 0.0;
  double resolve_reward = 0.0;  // mean reward of resolve-outcome continuations
  double share_correct = 0.0;
  double share_incorrect = 0.0;
  double share_resolve = 0.0;
  double degenerate_rate = 0.0;
  double degenerate_all_correct = 0.0;
  double degenerate_all_incorrect = 0.0;
  double degenerate_all_resolve = 0.0;
  std::uint64_t tokens_generated = 0;
  double mean_len_correct = 0.0;
  double mean_len_incorrect = 0.0;
  double mean_len_resolve = 0.0;

  std::string to_jsonl() const;
};

// Runs Algorithm-1 style steps over a pool of query worlds with one tabular
// policy table per world. Rollouts always read the per-step snapshot; the
// snapshot refreshes after the mu inner updates.
class Trainer {
 public:
  Trainer(std::vector<World> worlds, TrainConfig config, std::uint64_t master_seed);

  StepMetrics step();

  int steps_done() const { return step_; }
  std::uint64_t cumulative_tokens() const { return cumulative_tokens_; }
  const TrainConfig& config() const { return config_; }
  const std::vector<World>& worlds() const { return worlds_; }
  const std::vector<Policy>& policies() const { return policies_; }
  Policy& policy(std::size_t q) { return policies_[q]; }

 private:
  std::vector<World> worlds_;
  std::vector<Policy> policies_;
  std::vector<PolicySnapshot> snapshots_;
  TrainConfig config_;
  std::uint64_t master_seed_ = 0;
  int step_ = 0;
  std::uint64_t cumulative_tokens_ = 0;

  std::vector<std::size_t> select_batch();
};

// Scales baseline samples-per-step so both trainers generate the same token
// count per step, assuming equal trajectory lengths:
//   ratio = (batch_queries * n * (1 + m)) / (baseline_batch_queries * baseline_samples)
TrainConfig equalize_budget(const TrainConfig& re2_config, TrainConfig baseline_config);

// Measured variant: match a known re2 tokens-per-step figure given the
// baseline's mean trajectory length.
TrainConfig equalize_budget_measured(double re2_tokens_per_step, TrainConfig baseline_config,
                                     double baseline_mean_trajectory_len);

}  // namespace re2
