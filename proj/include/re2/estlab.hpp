#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "re2/common.hpp"
#include "re2/env.hpp"
#include "re2/policy.hpp"

namespace re2 {

// Exponential moving average of per-step batch accuracy, the comparison
// baseline for the out-of-group estimator.
struct EmaState {
  double value = 0.0;
  double decay = 0.9;
  bool initialized = false;

  // First observation initializes; afterwards value <- decay*value + (1-decay)*obs.
  void update(double obs) {
    value = initialized ? decay * value + (1.0 - decay) * obs : obs;
    initialized = true;
  }
};

struct EstimatorReport {
  std::string setting;  // "n=2,m=8", "n=2,m=8,mixed" or "ema(0.9)"
  int n = 0;
  int m = 0;
  double decay = 0.0;
  bool mixed_prefixes = false;
  double bias = 0.0;
  double variance = 0.0;
  double mse = 0.0;  // bias^2 + variance
  double truth = 0.0;
  int trials = 0;
};

// MC fraction of correct outcomes over independent from-scratch samples.
double ground_truth_accuracy(const World& world, const Policy& policy, int trials,
                             std::uint64_t master_seed);

struct EstimatorSweepConfig {
  std::vector<int> n_values{2, 4, 8, 16};
  std::vector<int> m_values{2, 4, 8, 16};
  int fixed_n = 8;
  int fixed_m = 8;
  int repeats = 200;
  double ema_decay = 0.9;
  bool include_mixed_prefixes = true;

  void validate() const;
};

// Bias/variance/MSE of the out-of-group correct-share estimator against the
// exact from-scratch accuracy, across (n, m) settings, plus the EMA baseline.
// Empty-prefix pools draw (n-1)*m from-scratch samples; mixed-prefix pools
// draw the (n-1) truncated prefixes the trainer would use.
std::vector<EstimatorReport> estimator_sweep(const World& world, const Policy& policy,
                                             const EstimatorSweepConfig& cfg,
                                             std::uint64_t master_seed);

struct NonstationaryResult {
  double estimator_mse = 0.0;
  double ema_mse = 0.0;
  double truth_before = 0.0;
  double truth_after = 0.0;
};

// The regime where the EMA lags: its value warms up on `before`, the policy
// then switches to `after`, and both estimators are scored against the new
// truth for post_steps steps.
NonstationaryResult nonstationary_comparison(const World& world, const Policy& before,
                                             const Policy& after, int n, int m, int warm_steps,
                                             int post_steps, double decay, int repeats,
                                             std::uint64_t master_seed);

void write_sweep_csv(std::ostream& out, std::span<const EstimatorReport> reports);

}  // namespace re2
