#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "re2/common.hpp"
#include "re2/env.hpp"
#include "re2/policy.hpp"

namespace re2 {

// Continuations cannot start from a terminal node; callers resample upstream.
class DegeneratePrefixError : public Error {
 public:
  explicit DegeneratePrefixError(const std::string& what) : Error(what) {}
};

struct Prefix {
  std::uint64_t query = 0;     // world seed
  std::vector<Token> tokens;   // valid walk from the root
  NodeId node = kNoNode;       // node the walk ends at
  double ratio = 0.0;          // the drawn ratio, not the realized fraction
};

struct Continuation {
  std::vector<Token> tokens;
  std::vector<NodeId> nodes;              // node where tokens[t] was emitted
  std::vector<double> behavior_log_probs; // one per token, under the snapshot
  Outcome outcome{OutcomeTag::incorrect, kNoNode};
};

struct PrefixGroup {
  Prefix prefix;
  std::vector<Continuation> continuations;  // exactly m, sharing the prefix
};

// Generated-token accounting used for budget equalization. Each continuation
// is counted as its full trajectory (prefix context + continuation tokens),
// matching sample-level budget comparisons between the two trainers.
struct TokenBudget {
  std::uint64_t prefix_rollout_tokens = 0;
  std::uint64_t continuation_tokens = 0;

  std::uint64_t total() const { return prefix_rollout_tokens + continuation_tokens; }
  TokenBudget& operator+=(const TokenBudget& o) {
    prefix_rollout_tokens += o.prefix_rollout_tokens;
    continuation_tokens += o.continuation_tokens;
    return *this;
  }
};

// One full from-scratch rollout under the snapshot: walks from the root until
// a terminal is reached or RESOLVE is emitted.
struct FullRollout {
  std::vector<Token> tokens;
  std::vector<NodeId> nodes;
  std::vector<double> log_probs;
};
FullRollout sample_full(const World& world, const PolicySnapshot& snap, RngStream& rng);

struct PrefixBatch {
  std::vector<Prefix> prefixes;
  std::uint64_t source_tokens = 0;  // every token of the n source rollouts
};

// n independent full rollouts, each truncated to floor(ratio * length) with
// ratio ~ U[0, 0.8]. A source rollout that resolved is truncated on its
// pre-resolve walk. Streams are keyed by (master, round, query, prefix index).
PrefixBatch sample_prefix_batch(const World& world, const PolicySnapshot& snap, int n,
                                std::uint64_t master_seed, std::uint64_t round);

// m continuations of one prefix from the snapshot, classified and with
// per-token behavior log-probs recorded.
PrefixGroup sample_continuations(const World& world, const PolicySnapshot& snap,
                                 const Prefix& prefix, int m, std::uint64_t master_seed,
                                 std::uint64_t round, int prefix_index);

struct QueryRollout {
  std::vector<PrefixGroup> groups;  // n groups of m continuations
  TokenBudget budget;
};
QueryRollout collect_query(const World& world, const PolicySnapshot& snap, int n, int m,
                           std::uint64_t master_seed, std::uint64_t round);

struct BatchRollout {
  std::vector<QueryRollout> queries;
  TokenBudget budget;
};

// Rollouts for a batch of queries. Parallel across queries; content is a pure
// function of (master seed, round, worlds, snapshots, n, m) regardless of the
// worker schedule.
BatchRollout collect_batch(std::span<const World> worlds, std::span<const PolicySnapshot> snaps,
                           int n, int m, std::uint64_t master_seed, std::uint64_t round);

// Trace export: one JSON line per continuation.
void write_trace_jsonl(std::ostream& out, std::span<const PrefixGroup> groups);

// Human-readable dump; resolve outcomes render as the marker line.
void write_trace_text(std::ostream& out, std::span<const PrefixGroup> groups);

}  // namespace re2
