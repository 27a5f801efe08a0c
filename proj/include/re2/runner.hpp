#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "re2/config.hpp"

namespace re2 {

inline constexpr const char* kArtifactVersion = "0.1.0";

struct RunArtifacts {
  std::filesystem::path run_dir;
  std::filesystem::path manifest;
  std::map<std::string, std::filesystem::path> outputs;
};

// Training run: metrics JSONL (one record per step), periodic + final
// checkpoints, and a manifest that reproduces the run bit-identically.
RunArtifacts run_train(const RunConfig& cfg, const std::filesystem::path& out_base);

// Evaluation suite on a checkpoint: pass@1 summary, scaling curve,
// difficulty bins, length and drop analyses. The checkpoint must match the
// configured worlds (seed base, query count, parameters).
RunArtifacts run_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                      const std::filesystem::path& out_base);

// Paired budget-equalized comparison over the shared seed list.
RunArtifacts run_compare(const RunConfig& re2_cfg, const RunConfig& baseline_cfg,
                         const std::filesystem::path& out_base);

// Estimator bias/variance sweep per query world.
RunArtifacts run_estlab(const RunConfig& cfg, const std::filesystem::path& out_base);

// Length-accuracy and prefix-drop analyses under the initial (untrained)
// policy.
RunArtifacts run_analyze(const RunConfig& cfg, const std::filesystem::path& out_base);

// Checkpoint persistence for a multi-query policy set.
void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg,
                     const std::vector<World>& worlds, const std::vector<Policy>& policies,
                     int step);

struct Checkpoint {
  int step = 0;
  std::uint64_t world_seed_base = 0;
  int queries = 0;
  WorldParams world_params;
  std::vector<std::string> policy_json;
};

Checkpoint read_checkpoint(const std::filesystem::path& path);

// Rebuilds the policy set against the configured worlds; throws
// IncompatibleError when the checkpoint does not match them.
std::vector<Policy> load_policies(const Checkpoint& ck, const RunConfig& cfg,
                                  const std::vector<World>& worlds);

}  // namespace re2
