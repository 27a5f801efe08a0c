#pragma once

#include <string>
#include <vector>

#include "re2/common.hpp"

namespace re2 {

class Policy;  // policy.hpp

enum class NodeKind { internal, terminal_correct, terminal_incorrect };

enum class OutcomeTag { correct, incorrect, resolve };

struct Outcome {
  OutcomeTag tag;
  NodeId terminal = kNoNode;  // set for final answers, kNoNode for resolve
  bool is_correct() const { return tag == OutcomeTag::correct; }
  bool is_resolve() const { return tag == OutcomeTag::resolve; }
};

const char* outcome_name(OutcomeTag tag);

struct Node {
  NodeId id = kNoNode;
  NodeKind kind = NodeKind::internal;
  // Outgoing edges in token order. Terminal nodes have none.
  std::vector<std::pair<Token, NodeId>> edges;

  bool terminal() const { return kind != NodeKind::internal; }
  NodeId child(Token t) const;  // kNoNode if no such edge

  bool operator==(const Node&) const = default;
};

struct WorldParams {
  int branch_count = 2;
  double trap_fraction = 0.5;
  int corridor_len_good = 1;
  int corridor_len_trap = 2;
  // 0 = derive branch_count + answers_max + 1 (choice tokens, answer tokens,
  // RESOLVE).
  int vocab_size = 0;
  // Answer nodes at corridor ends carry 1..answers_max answer edges, drawn per
  // branch from the world seed. Good branches route exactly one of them to a
  // correct terminal; trap branches route all of them to incorrect terminals.
  int answers_max = 1;

  bool operator==(const WorldParams&) const = default;
};

// A seeded layered decision graph: a root choice over branch corridors, each
// ending at an answer node whose edges reach terminal nodes. Trap branches
// (no correct terminal reachable) get the longer corridor. Worlds are
// immutable after construction and safe to share across threads.
class World {
 public:
  World(std::uint64_t seed, WorldParams params, std::vector<Node> nodes, NodeId root);

  std::uint64_t seed() const { return seed_; }
  const WorldParams& params() const { return params_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  NodeId root() const { return root_; }

  int vocab_size() const { return params_.vocab_size; }
  Token resolve_token() const { return params_.vocab_size - 1; }

  // Legal tokens at a node: its edge tokens plus RESOLVE (internal nodes only).
  std::vector<Token> legal_tokens(NodeId id) const;

  // Branch annotations, derived from the node table by reachability.
  int branch_count() const { return params_.branch_count; }
  int branch_of(NodeId id) const { return branch_of_[static_cast<std::size_t>(id)]; }
  bool branch_is_trap(int branch) const { return branch_trap_[static_cast<std::size_t>(branch)]; }
  int trap_branch_count() const;

  // Longest root-to-terminal path, in tokens.
  int max_depth() const { return max_depth_; }

  std::string to_json() const;
  static World from_json(const std::string& text);

  bool operator==(const World& other) const;

 private:
  std::uint64_t seed_;
  WorldParams params_;
  std::vector<Node> nodes_;
  NodeId root_;
  std::vector<int> branch_of_;    // -1 for the root
  std::vector<bool> branch_trap_; // per root edge
  int max_depth_ = 0;

  void annotate();
};

// Builds the world for (seed, params). Deterministic; throws ConfigError on
// parameter combinations that cannot satisfy the world invariants.
World generate_world(std::uint64_t seed, const WorldParams& params);

// Classifies a complete trajectory (valid edge-walk from the root, possibly
// ending in RESOLVE). Throws MalformedTrajectoryError on invalid walks.
Outcome classify(const World& world, const std::vector<Token>& trajectory);

// Walks a token sequence from `from`, returning the node reached. Throws
// MalformedTrajectoryError if a token has no matching edge or the walk runs
// through a terminal.
NodeId walk(const World& world, NodeId from, const std::vector<Token>& tokens);

// Exact per-node outcome probabilities under a policy, by DP over the DAG.
struct OutcomeProbs {
  double p_correct = 0.0;
  double p_incorrect = 0.0;
  double p_resolve = 0.0;
};

// probs[v] = distribution of the eventual outcome of a walk started at v.
std::vector<OutcomeProbs> outcome_probabilities(const World& world, const Policy& policy);

// Exact probability that an attempt started from `from` ends correct,
// counting resolve as not correct.
double correct_probability(const World& world, const Policy& policy, NodeId from);

// Exact probability that a from-scratch attempt with up to R attempts (each
// resolve consumes one) ends correct: V_R = P(c) + P(r) * V_{R-1}, V_0 = 0.
double oracle_value(const World& world, const Policy& policy, int redo_budget);

}  // namespace re2
