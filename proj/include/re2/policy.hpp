#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "re2/common.hpp"
#include "re2/env.hpp"
#include "re2/rng.hpp"

namespace re2 {

// Tabular softmax policy: one logit per (node, legal token). Legal tokens at
// an internal node are its edge tokens plus RESOLVE (always last); illegal
// tokens have probability exactly zero. Sampling and log-probs share the same
// masked softmax, so exp(log_prob) sums to one over the legal set.
class Policy {
 public:
  explicit Policy(const World& world, double temperature = 1.0);

  double temperature() const { return temperature_; }
  void set_temperature(double t);
  Policy with_temperature(double t) const;

  // When masked, RESOLVE is removed from every node's legal set and the
  // remaining probabilities renormalize. Used for the no-resolve baseline and
  // for forced-answer evaluation attempts.
  bool resolve_masked() const { return resolve_masked_; }
  Policy with_resolve_masked(bool masked) const;

  std::uint64_t world_seed() const { return world_seed_; }

  // Active (legal, unmasked) tokens at a node, in layout order. RESOLVE is
  // always last and drops off the span when masked.
  std::span<const Token> legal_tokens(NodeId node) const;
  int active_count(NodeId node) const;

  double log_prob(NodeId node, Token token) const;
  std::vector<double> probs(NodeId node) const;  // aligned with active tokens

  // d log_prob(node, token) / d logit(node, k) for every active k.
  std::vector<double> log_prob_grad(NodeId node, Token token) const;

  Token sample_token(NodeId node, RngStream& rng) const;

  // Flat parameter view for optimizers and finite differences.
  std::size_t param_count() const { return logits_.size(); }
  const std::vector<double>& logits() const { return logits_; }
  double logit(NodeId node, Token token) const;
  void set_logit(NodeId node, Token token, double value);
  void add_to_logit(NodeId node, Token token, double delta);
  std::size_t param_index(NodeId node, Token token) const;
  std::pair<NodeId, Token> param_location(std::size_t index) const;
  void set_param(std::size_t index, double value) { logits_[index] = value; }
  void add_to_param(std::size_t index, double delta) { logits_[index] += delta; }

  // Sets the RESOLVE logit at every internal node (the "redo is rare in the
  // untrained policy" knob).
  void set_resolve_logits(double value);

  std::string to_json() const;
  static Policy from_json(const World& world, const std::string& text);

  bool operator==(const Policy& other) const;

 private:
  struct Layout;
  std::shared_ptr<const Layout> layout_;
  std::vector<double> logits_;
  double temperature_ = 1.0;
  bool resolve_masked_ = false;
  std::uint64_t world_seed_ = 0;

  // Index into the node's active span for `token`; throws MaskedTokenError.
  int active_slot(NodeId node, Token token) const;
  void check_internal(NodeId node) const;
};

// A frozen copy of the policy taken at rollout time. Immutable; log-probs
// queried on a snapshot never change while the live policy trains.
class PolicySnapshot {
 public:
  explicit PolicySnapshot(Policy p) : frozen_(std::move(p)) {}

  const Policy& params() const { return frozen_; }
  double log_prob(NodeId node, Token token) const { return frozen_.log_prob(node, token); }
  Token sample_token(NodeId node, RngStream& rng) const { return frozen_.sample_token(node, rng); }

 private:
  Policy frozen_;  // only const access is exposed
};

inline PolicySnapshot snapshot(const Policy& policy) { return PolicySnapshot(policy); }

}  // namespace re2
