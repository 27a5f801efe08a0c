#pragma once

// Test-side oracles, independent of the library code paths they check.

#include <cmath>
#include <functional>
#include <vector>

#include "re2/env.hpp"
#include "re2/policy.hpp"
#include "re2/reward.hpp"
#include "re2/rng.hpp"

namespace oracles {

// Simulates the redo chain directly: each round draws one outcome; correct
// pays 1, incorrect pays 0, resolve consumes a round. Returns the mean reward
// over `trials` chains of at most R rounds.
struct RedoChainResult {
  double mean = 0.0;
  double std_error = 0.0;
};

inline RedoChainResult mc_redo_chain(const re2::OutcomeDistribution& dist, int R, int trials,
                                     re2::RngStream& rng) {
  long long paid = 0;
  for (int t = 0; t < trials; ++t) {
    for (int round = 0; round < R; ++round) {
      const double u = rng.next_real();
      if (u < dist.p_correct) {
        ++paid;
        break;
      }
      if (u < dist.p_correct + dist.p_incorrect) break;
      // resolve: consume the round and redraw
    }
  }
  RedoChainResult out;
  out.mean = static_cast<double>(paid) / trials;
  out.std_error = std::sqrt(std::max(out.mean * (1.0 - out.mean), 1e-12) / trials);
  return out;
}

// Central finite differences of a scalar function of a parameter vector.
inline std::vector<double> finite_diff(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> params, double step) {
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + step;
    const double hi = f(params);
    params[i] = keep - step;
    const double lo = f(params);
    params[i] = keep;
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

// Exhaustive enumeration of every trajectory a policy can emit: all
// root-to-terminal paths plus the resolve absorption at each internal node.
struct PathRecord {
  double prob = 0.0;
  int length = 0;
  re2::OutcomeTag tag = re2::OutcomeTag::incorrect;
};

inline void enumerate_paths_from(const re2::World& world, const re2::Policy& policy,
                                 re2::NodeId node, double prob, int length,
                                 std::vector<PathRecord>& out) {
  const re2::Node& nd = world.node(node);
  if (nd.terminal()) {
    out.push_back({prob, length,
                   nd.kind == re2::NodeKind::terminal_correct ? re2::OutcomeTag::correct
                                                              : re2::OutcomeTag::incorrect});
    return;
  }
  const auto toks = policy.legal_tokens(node);
  const std::vector<double> p = policy.probs(node);
  for (std::size_t k = 0; k < toks.size(); ++k) {
    if (p[k] == 0.0) continue;
    if (toks[k] == world.resolve_token()) {
      out.push_back({prob * p[k], length + 1, re2::OutcomeTag::resolve});
      continue;
    }
    enumerate_paths_from(world, policy, nd.child(toks[k]), prob * p[k], length + 1, out);
  }
}

inline std::vector<PathRecord> enumerate_paths(const re2::World& world,
                                               const re2::Policy& policy) {
  std::vector<PathRecord> out;
  enumerate_paths_from(world, policy, world.root(), 1.0, 0, out);
  return out;
}

// Exact Kendall-style association between length and correctness over the
// final-answer distribution: sum over pairs of p_i p_j sign((l_i-l_j)(c_i-c_j)).
// Negative means longer trajectories are less likely correct.
inline double exact_length_accuracy_association(const std::vector<PathRecord>& paths) {
  double assoc = 0.0;
  for (const PathRecord& a : paths) {
    if (a.tag == re2::OutcomeTag::resolve) continue;
    for (const PathRecord& b : paths) {
      if (b.tag == re2::OutcomeTag::resolve) continue;
      const double ca = a.tag == re2::OutcomeTag::correct ? 1.0 : 0.0;
      const double cb = b.tag == re2::OutcomeTag::correct ? 1.0 : 0.0;
      const double sl = static_cast<double>(a.length - b.length);
      const double sc = ca - cb;
      if (sl != 0.0 && sc != 0.0)
        assoc += a.prob * b.prob * (sl * sc > 0 ? 1.0 : -1.0);
    }
  }
  return assoc;
}

// Exact mean trajectory length conditional on an outcome tag.
inline double exact_mean_length(const std::vector<PathRecord>& paths, re2::OutcomeTag tag) {
  double mass = 0.0, len = 0.0;
  for (const PathRecord& p : paths) {
    if (p.tag != tag) continue;
    mass += p.prob;
    len += p.prob * p.length;
  }
  return mass > 0.0 ? len / mass : 0.0;
}

// 3-sigma binomial check: is `observed` within 3 standard errors of `expected`
// over `trials` draws?
inline bool within_3sigma(double observed, double expected, int trials) {
  const double se = std::sqrt(std::max(expected * (1.0 - expected), 1e-12) / trials);
  return std::abs(observed - expected) <= 3.0 * se;
}

}  // namespace oracles
