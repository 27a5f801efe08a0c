#include "re2/rollout.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "re2/parallel.hpp"

namespace re2 {

namespace {
constexpr int kTerminalPrefixRetries = 8;
constexpr double kRatioCap = 0.8;
}  // namespace

FullRollout sample_full(const World& world, const PolicySnapshot& snap, RngStream& rng) {
  FullRollout out;
  NodeId at = world.root();
  while (!world.node(at).terminal()) {
    const Token tok = snap.sample_token(at, rng);
    out.tokens.push_back(tok);
    out.nodes.push_back(at);
    out.log_probs.push_back(snap.log_prob(at, tok));
    if (tok == world.resolve_token()) break;
    at = world.node(at).child(tok);
  }
  return out;
}

PrefixBatch sample_prefix_batch(const World& world, const PolicySnapshot& snap, int n,
                                std::uint64_t master_seed, std::uint64_t round) {
  if (n < 2) throw ConfigError("prefix count n must be >= 2");
  PrefixBatch out;
  out.prefixes.resize(static_cast<std::size_t>(n));
  std::vector<std::uint64_t> source(static_cast<std::size_t>(n), 0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    RngStream rng = make_stream(master_seed,
                                {stream_tag::kPrefix, round, world.seed(), static_cast<std::uint64_t>(i)});
    const FullRollout full = sample_full(world, snap, rng);
    source[i] = full.tokens.size();

    // The walk we truncate excludes a trailing RESOLVE.
    std::size_t walk_len = full.tokens.size();
    if (walk_len > 0 && full.tokens.back() == world.resolve_token()) --walk_len;

    Prefix p;
    p.query = world.seed();
    for (int attempt = 0; attempt <= kTerminalPrefixRetries; ++attempt) {
      p.ratio = kRatioCap * rng.next_real();
      const std::size_t len = static_cast<std::size_t>(
          std::floor(p.ratio * static_cast<double>(walk_len)));
      p.tokens.assign(full.tokens.begin(), full.tokens.begin() + static_cast<std::ptrdiff_t>(len));
      p.node = walk(world, world.root(), p.tokens);
      if (!world.node(p.node).terminal()) break;
      if (attempt == kTerminalPrefixRetries) {
        p.ratio = 0.0;
        p.tokens.clear();
        p.node = world.root();
      }
    }
    out.prefixes[i] = std::move(p);
  });
  for (std::uint64_t s : source) out.source_tokens += s;
  return out;
}

PrefixGroup sample_continuations(const World& world, const PolicySnapshot& snap,
                                 const Prefix& prefix, int m, std::uint64_t master_seed,
                                 std::uint64_t round, int prefix_index) {
  if (m < 2) throw ConfigError("continuation count m must be >= 2");
  if (world.node(prefix.node).terminal())
    throw DegeneratePrefixError("prefix ends at a terminal node");

  PrefixGroup group;
  group.prefix = prefix;
  group.continuations.resize(static_cast<std::size_t>(m));
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t j) {
    RngStream rng = make_stream(master_seed,
                                {stream_tag::kContinuation, round, world.seed(),
                                 static_cast<std::uint64_t>(prefix_index), static_cast<std::uint64_t>(j)});
    Continuation c;
    NodeId at = prefix.node;
    while (!world.node(at).terminal()) {
      const Token tok = snap.sample_token(at, rng);
      c.tokens.push_back(tok);
      c.nodes.push_back(at);
      c.behavior_log_probs.push_back(snap.log_prob(at, tok));
      if (tok == world.resolve_token()) break;
      at = world.node(at).child(tok);
    }
    std::vector<Token> full = prefix.tokens;
    full.insert(full.end(), c.tokens.begin(), c.tokens.end());
    c.outcome = classify(world, full);
    group.continuations[j] = std::move(c);
  });
  return group;
}

QueryRollout collect_query(const World& world, const PolicySnapshot& snap, int n, int m,
                           std::uint64_t master_seed, std::uint64_t round) {
  QueryRollout out;
  PrefixBatch prefixes = sample_prefix_batch(world, snap, n, master_seed, round);
  out.budget.prefix_rollout_tokens = prefixes.source_tokens;
  out.groups.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    PrefixGroup g =
        sample_continuations(world, snap, prefixes.prefixes[static_cast<std::size_t>(i)], m,
                             master_seed, round, i);
    for (const Continuation& c : g.continuations)
      out.budget.continuation_tokens += g.prefix.tokens.size() + c.tokens.size();
    out.groups.push_back(std::move(g));
  }
  return out;
}

BatchRollout collect_batch(std::span<const World> worlds, std::span<const PolicySnapshot> snaps,
                           int n, int m, std::uint64_t master_seed, std::uint64_t round) {
  if (worlds.empty()) throw ConfigError("collect_batch needs a non-empty query batch");
  if (worlds.size() != snaps.size())
    throw ConfigError("collect_batch needs one snapshot per query");
  BatchRollout out;
  out.queries.resize(worlds.size());
  parallel_for(worlds.size(), [&](std::size_t q) {
    out.queries[q] = collect_query(worlds[q], snaps[q], n, m, master_seed, round);
  });
  for (const QueryRollout& q : out.queries) out.budget += q.budget;
  return out;
}

void write_trace_jsonl(std::ostream& out, std::span<const PrefixGroup> groups) {
  for (const PrefixGroup& g : groups) {
    for (const Continuation& c : g.continuations) {
      nlohmann::ordered_json j;
      j["query"] = g.prefix.query;
      j["prefix_tokens"] = g.prefix.tokens;
      j["continuation_tokens"] = c.tokens;
      j["outcome"] = outcome_name(c.outcome.tag);
      j["ratio"] = g.prefix.ratio;
      out << j.dump() << '\n';
    }
  }
}

void write_trace_text(std::ostream& out, std::span<const PrefixGroup> groups) {
  for (const PrefixGroup& g : groups) {
    out << "query " << g.prefix.query << "  ratio " << g.prefix.ratio << "  prefix:";
    for (Token t : g.prefix.tokens) out << ' ' << t;
    out << '\n';
    for (const Continuation& c : g.continuations) {
      out << "  continuation:";
      for (Token t : c.tokens) out << ' ' << t;
      out << '\n';
      if (c.outcome.is_resolve())
        out << "  " << kResolveMarker << '\n';
      else
        out << "  final answer: " << outcome_name(c.outcome.tag) << '\n';
    }
  }
}

}  // namespace re2
