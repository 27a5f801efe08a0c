#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "re2/common.hpp"
#include "re2/env.hpp"
#include "re2/estlab.hpp"
#include "re2/eval.hpp"
#include "re2/trainer.hpp"

namespace re2 {

// The whole experiment document. Parsed strictly: unknown keys are rejected
// with the offending key named, missing required fields likewise.
struct RunConfig {
  std::uint64_t seed = 0;  // master seed for rollouts, batches and evaluation
  std::string out = "runs";

  // World pool: `queries` worlds seeded world_seed_base .. base+queries-1.
  int queries = 1;
  std::uint64_t world_seed_base = 0;  // defaults to `seed`
  bool world_seed_base_explicit = false;
  WorldParams world;

  TrainConfig train;
  EvalConfig eval;

  EstimatorSweepConfig estlab;
  int estlab_truth_trials = 1024;

  std::vector<std::uint64_t> compare_seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int compare_eval_every = 10;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  void validate() const;

  // Fully resolved document (all defaults materialized), key-sorted; two
  // configs hash equal iff they resolve identically.
  std::string canonical_json() const;
  std::uint64_t config_hash() const;

  std::vector<World> build_worlds() const;
  Policy initial_policy(const World& w) const;
};

}  // namespace re2
