#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "re2/common.hpp"
#include "re2/env.hpp"
#include "re2/policy.hpp"
#include "re2/rng.hpp"

namespace re2 {

struct EvalConfig {
  double eval_temperature = 0.6;
  int restart_cap = 5;
  int samples_per_query = 256;
  int difficulty_bins = 7;
  double drop_threshold_low = 0.25;
  double drop_threshold_high = 0.75;
  std::vector<double> truncation_fractions{0.2, 0.4, 0.6, 0.8};
  // After restart_cap resolves, run one forced-answer attempt with RESOLVE
  // masked. Off scores the query incorrect instead.
  bool fallback_forced_answer = true;
  int reference_samples = 256;
  std::vector<int> scaling_ks{1, 2, 4, 8, 16, 32, 64, 128, 256};
  int length_samples = 128;
  int drop_pool_samples = 128;
  int drop_prefix_samples = 0;  // 0 = exact DP accuracies

  void validate() const;
};

struct InferResult {
  Outcome outcome{OutcomeTag::incorrect, kNoNode};
  int attempts = 0;
};

// Samples from scratch at the eval temperature; on resolve, restarts. Attempt
// count never exceeds restart_cap + 1.
InferResult infer_with_restarts(const World& world, const Policy& policy, const EvalConfig& cfg,
                                RngStream& rng);

// Prepared single-query evaluator; avoids re-tempering the policy per sample.
class RestartEvaluator {
 public:
  RestartEvaluator(const World& world, const Policy& policy, const EvalConfig& cfg);
  InferResult infer(RngStream& rng) const;
  Outcome single_sample(RngStream& rng) const;

 private:
  const World& world_;
  EvalConfig cfg_;
  Policy tempered_;
  Policy forced_;
};

// Exact restart-capped accuracy from the DP oracle (the MC infer loop
// converges to this value).
double exact_pass_at_1(const World& world, const Policy& policy, const EvalConfig& cfg);

// MC pass@1 with restarts, averaged over queries and samples_per_query.
double pass_at_1(std::span<const World> worlds, std::span<const Policy> policies,
                 const EvalConfig& cfg, std::uint64_t master_seed);

// Majority voting over k from-scratch samples per query. Resolve samples
// consume budget and cast no vote; ties break toward the earliest-seen
// answer; zero final answers score incorrect.
double majority_vote(std::span<const World> worlds, std::span<const Policy> policies, int k,
                     const EvalConfig& cfg, std::uint64_t master_seed);

struct ScalingCurve {
  std::vector<int> sample_counts;
  std::vector<double> accuracies;
};

// Majority-vote accuracy over cfg.scaling_ks. Accuracies at each k reuse the
// first k samples of one per-query pool, so curves share their noise.
ScalingCurve scaling_curve(std::span<const World> worlds, std::span<const Policy> policies,
                           const EvalConfig& cfg, std::uint64_t master_seed);

struct DifficultyBin {
  int index = 0;  // 1-based; bin 1 holds reference accuracy 0
  double lo = 0.0, hi = 0.0;
  int queries = 0;
  double ref_accuracy = 0.0;
  double accuracy = 0.0;
  double resolve_share = 0.0;
};

struct DifficultyReport {
  std::vector<DifficultyBin> bins;  // occupied bins only
};

// Bins queries by reference-policy accuracy (equal-width over [0,1]) and
// reports the eval policy's restart-capped accuracy and resolve share per bin.
DifficultyReport difficulty_bins(std::span<const World> worlds,
                                 std::span<const Policy> reference_policies,
                                 std::span<const Policy> eval_policies, const EvalConfig& cfg,
                                 std::uint64_t master_seed);

struct LengthBin {
  int length = 0;
  int count = 0;
  double share = 0.0;
  int final_answers = 0;
  double accuracy = 0.0;  // over final answers in the bin; 0 when none
};

struct LengthReport {
  std::vector<LengthBin> bins;
  int samples = 0;
  int final_answers = 0;
  bool correlation_defined = false;
  double rank_correlation = 0.0;  // Spearman over (length, correct) of final answers
};

LengthReport length_accuracy_analysis(const World& world, const Policy& policy, int samples,
                                      std::uint64_t master_seed);

struct DropReport {
  std::vector<double> thresholds;
  std::vector<double> fractions;
  // counts[threshold][fraction]
  std::vector<std::vector<int>> all_drops;
  std::vector<std::vector<int>> first_drops;
  int pool = 0;      // incorrect full trajectories analyzed
  int excluded = 0;  // queries with from-scratch accuracy 0 (drop undefined)
};

// Truncates incorrect full trajectories at each fraction and measures the
// relative drop of continuation accuracy vs from-scratch accuracy.
// per_prefix_samples = 0 evaluates accuracies exactly from the DP oracle.
DropReport prefix_drop_analysis(const World& world, const Policy& policy, const EvalConfig& cfg,
                                int pool_samples, int per_prefix_samples,
                                std::uint64_t master_seed);

struct ResolveProfile {
  double trap_mean = 0.0;  // mean RESOLVE probability over trap-branch internal nodes
  double good_mean = 0.0;
  int trap_nodes = 0;
  int good_nodes = 0;
};

ResolveProfile resolve_profile(const World& world, const Policy& policy);

// Spearman rank correlation with average ranks for ties; NaN when undefined.
double spearman(std::span<const double> x, std::span<const double> y);

void write_scaling_csv(std::ostream& out, const ScalingCurve& curve);
void write_difficulty_csv(std::ostream& out, const DifficultyReport& report);
void write_length_csv(std::ostream& out, const LengthReport& report);
void write_drop_csv(std::ostream& out, const DropReport& report);

}  // namespace re2
