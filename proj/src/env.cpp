#include "re2/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "re2/policy.hpp"

namespace re2 {

namespace {

int resolved_vocab_size(const WorldParams& p) {
  return p.vocab_size > 0 ? p.vocab_size : p.branch_count + p.answers_max + 1;
}

void validate_params(const WorldParams& p, int vocab) {
  if (p.branch_count < 2) throw ConfigError("branch_count must be >= 2");
  if (p.trap_fraction < 0.0 || p.trap_fraction > 1.0)
    throw ConfigError("trap_fraction must be in [0, 1]");
  if (p.trap_fraction >= 1.0 && p.trap_fraction > 0.0)
    throw ConfigError("trap_fraction = 1 leaves no solvable branch");
  if (p.corridor_len_good < 1) throw ConfigError("corridor_len_good must be >= 1");
  if (p.corridor_len_trap < p.corridor_len_good)
    throw ConfigError("corridor_len_trap must be >= corridor_len_good");
  if (p.answers_max < 1) throw ConfigError("answers_max must be >= 1");
  if (vocab < p.branch_count + 2)
    throw ConfigError("vocab_size must be >= branch_count + 2");
  if (p.answers_max > vocab - p.branch_count - 1)
    throw ConfigError("answers_max exceeds the available answer tokens");
}

int trap_count_for(const WorldParams& p) {
  if (p.trap_fraction <= 0.0) return 0;
  int raw = static_cast<int>(std::lround(p.trap_fraction * p.branch_count));
  return std::clamp(raw, 1, p.branch_count - 1);
}

const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::internal: return "internal";
    case NodeKind::terminal_correct: return "terminal_correct";
    case NodeKind::terminal_incorrect: return "terminal_incorrect";
  }
  return "internal";
}

NodeKind kind_from_name(const std::string& s) {
  if (s == "internal") return NodeKind::internal;
  if (s == "terminal_correct") return NodeKind::terminal_correct;
  if (s == "terminal_incorrect") return NodeKind::terminal_incorrect;
  throw ConfigError("unknown node kind '" + s + "'");
}

}  // namespace

const char* outcome_name(OutcomeTag tag) {
  switch (tag) {
    case OutcomeTag::correct: return "correct";
    case OutcomeTag::incorrect: return "incorrect";
    case OutcomeTag::resolve: return "resolve";
  }
  return "incorrect";
}

NodeId Node::child(Token t) const {
  for (const auto& [tok, dst] : edges)
    if (tok == t) return dst;
  return kNoNode;
}

World::World(std::uint64_t seed, WorldParams params, std::vector<Node> nodes, NodeId root)
    : seed_(seed), params_(std::move(params)), nodes_(std::move(nodes)), root_(root) {
  params_.vocab_size = resolved_vocab_size(params_);
  validate_params(params_, params_.vocab_size);
  if (root_ < 0 || static_cast<std::size_t>(root_) >= nodes_.size())
    throw ConfigError("world root out of range");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.id != static_cast<NodeId>(i)) throw ConfigError("node ids must match their index");
    if (n.terminal() && !n.edges.empty()) throw ConfigError("terminal nodes must have no edges");
    if (!n.terminal() && n.edges.empty())
      throw ConfigError("internal nodes need at least one edge");
    std::set<Token> seen;
    for (const auto& [tok, dst] : n.edges) {
      if (tok < 0 || tok >= params_.vocab_size - 1)
        throw ConfigError("edge token outside the non-resolve vocab");
      if (!seen.insert(tok).second) throw ConfigError("duplicate edge token at a node");
      if (dst < 0 || static_cast<std::size_t>(dst) >= nodes_.size())
        throw ConfigError("edge target out of range");
    }
  }
  annotate();
}

void World::annotate() {
  const std::size_t n = nodes_.size();
  branch_of_.assign(n, -1);
  if (static_cast<int>(node(root_).edges.size()) != params_.branch_count)
    throw ConfigError("root must have exactly branch_count edges");

  // Depth-first walk per root edge; also serves as the cycle check.
  std::vector<int> depth(n, -1);
  std::vector<int> state(n, 0);  // 0 unvisited, 1 on stack, 2 done
  std::vector<NodeId> order;
  auto dfs = [&](NodeId start, auto&& self) -> void {
    if (state[start] == 1) throw ConfigError("world graph has a cycle");
    if (state[start] == 2) return;
    state[start] = 1;
    for (const auto& [tok, dst] : node(start).edges) self(dst, self);
    state[start] = 2;
    order.push_back(start);
  };
  dfs(root_, dfs);
  if (order.size() != n) throw ConfigError("world has nodes unreachable from the root");

  // order is reverse-topological; compute longest path to a terminal.
  for (NodeId v : order) {
    const Node& nd = node(v);
    if (nd.terminal()) {
      depth[v] = 0;
      continue;
    }
    int best = 0;
    for (const auto& [tok, dst] : nd.edges) best = std::max(best, depth[dst] + 1);
    depth[v] = best;
  }
  max_depth_ = depth[root_];

  branch_trap_.assign(node(root_).edges.size(), true);
  for (std::size_t b = 0; b < node(root_).edges.size(); ++b) {
    std::vector<NodeId> stack{node(root_).edges[b].second};
    while (!stack.empty()) {
      NodeId v = stack.back();
      stack.pop_back();
      if (branch_of_[static_cast<std::size_t>(v)] != -1) continue;
      branch_of_[static_cast<std::size_t>(v)] = static_cast<int>(b);
      if (node(v).kind == NodeKind::terminal_correct) branch_trap_[b] = false;
      for (const auto& [tok, dst] : node(v).edges) stack.push_back(dst);
    }
  }
}

std::vector<Token> World::legal_tokens(NodeId id) const {
  const Node& n = node(id);
  std::vector<Token> out;
  out.reserve(n.edges.size() + 1);
  for (const auto& [tok, dst] : n.edges) out.push_back(tok);
  if (!n.terminal()) out.push_back(resolve_token());
  return out;
}

int World::trap_branch_count() const {
  return static_cast<int>(std::count(branch_trap_.begin(), branch_trap_.end(), true));
}

bool World::operator==(const World& other) const {
  return seed_ == other.seed_ && params_ == other.params_ && root_ == other.root_ &&
         nodes_ == other.nodes_;
}

World generate_world(std::uint64_t seed, const WorldParams& params) {
  WorldParams p = params;
  p.vocab_size = resolved_vocab_size(p);
  validate_params(p, p.vocab_size);
  const int traps = trap_count_for(p);
  if (traps >= 1 && p.corridor_len_trap <= p.corridor_len_good)
    throw ConfigError("worlds with traps need corridor_len_trap > corridor_len_good");

  RngStream gen = make_stream(seed, {stream_tag::kWorldGen});

  // Pick which branches are traps: partial Fisher-Yates over branch indices.
  std::vector<int> branch_ids(static_cast<std::size_t>(p.branch_count));
  std::iota(branch_ids.begin(), branch_ids.end(), 0);
  for (int i = 0; i < traps; ++i) {
    int j = i + static_cast<int>(gen.next_below(static_cast<std::uint64_t>(p.branch_count - i)));
    std::swap(branch_ids[static_cast<std::size_t>(i)], branch_ids[static_cast<std::size_t>(j)]);
  }
  std::vector<bool> is_trap(static_cast<std::size_t>(p.branch_count), false);
  for (int i = 0; i < traps; ++i) is_trap[static_cast<std::size_t>(branch_ids[static_cast<std::size_t>(i)])] = true;

  const int answers_avail = std::min(p.answers_max, p.vocab_size - p.branch_count - 1);

  std::vector<Node> nodes;
  Node root;
  root.id = 0;
  root.kind = NodeKind::internal;
  nodes.push_back(root);

  for (int b = 0; b < p.branch_count; ++b) {
    const int corridor = is_trap[static_cast<std::size_t>(b)] ? p.corridor_len_trap : p.corridor_len_good;
    const int arity = 1 + static_cast<int>(gen.next_below(static_cast<std::uint64_t>(answers_avail)));
    const int correct_slot =
        is_trap[static_cast<std::size_t>(b)] ? -1 : static_cast<int>(gen.next_below(static_cast<std::uint64_t>(arity)));

    NodeId prev = 0;
    Token entry = static_cast<Token>(b);
    for (int k = 0; k < corridor; ++k) {
      Node step;
      step.id = static_cast<NodeId>(nodes.size());
      step.kind = NodeKind::internal;
      nodes[static_cast<std::size_t>(prev)].edges.emplace_back(entry, step.id);
      nodes.push_back(step);
      prev = step.id;
      entry = 0;  // corridor steps reuse token 0
    }

    Node answer;
    answer.id = static_cast<NodeId>(nodes.size());
    answer.kind = NodeKind::internal;
    nodes[static_cast<std::size_t>(prev)].edges.emplace_back(entry, answer.id);
    nodes.push_back(answer);

    for (int a = 0; a < arity; ++a) {
      Node term;
      term.id = static_cast<NodeId>(nodes.size());
      term.kind = (a == correct_slot) ? NodeKind::terminal_correct : NodeKind::terminal_incorrect;
      nodes[static_cast<std::size_t>(answer.id)].edges.emplace_back(
          static_cast<Token>(p.branch_count + a), term.id);
      nodes.push_back(term);
    }
  }

  return World(seed, p, std::move(nodes), 0);
}

NodeId walk(const World& world, NodeId from, const std::vector<Token>& tokens) {
  NodeId at = from;
  for (Token t : tokens) {
    const Node& n = world.node(at);
    if (n.terminal())
      throw MalformedTrajectoryError("walk continues past a terminal node");
    if (t == world.resolve_token())
      throw MalformedTrajectoryError("walk crosses a RESOLVE token");
    NodeId next = n.child(t);
    if (next == kNoNode) {
      std::ostringstream msg;
      msg << "token " << t << " has no edge at node " << at;
      throw MalformedTrajectoryError(msg.str());
    }
    at = next;
  }
  return at;
}

Outcome classify(const World& world, const std::vector<Token>& trajectory) {
  NodeId at = world.root();
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    Token t = trajectory[i];
    if (t == world.resolve_token()) {
      if (i + 1 != trajectory.size())
        throw MalformedTrajectoryError("RESOLVE must end the trajectory");
      if (world.node(at).terminal())
        throw MalformedTrajectoryError("RESOLVE emitted at a terminal node");
      return Outcome{OutcomeTag::resolve, kNoNode};
    }
    at = walk(world, at, {t});
  }
  const Node& end = world.node(at);
  if (!end.terminal())
    throw MalformedTrajectoryError("trajectory stops before reaching a terminal");
  return Outcome{end.kind == NodeKind::terminal_correct ? OutcomeTag::correct : OutcomeTag::incorrect,
                 at};
}

std::vector<OutcomeProbs> outcome_probabilities(const World& world, const Policy& policy) {
  const std::size_t n = world.nodes().size();
  std::vector<OutcomeProbs> out(n);
  std::vector<int> state(n, 0);
  std::vector<NodeId> order;
  order.reserve(n);
  auto dfs = [&](NodeId v, auto&& self) -> void {
    if (state[static_cast<std::size_t>(v)]) return;
    state[static_cast<std::size_t>(v)] = 1;
    for (const auto& [tok, dst] : world.node(v).edges) self(dst, self);
    order.push_back(v);
  };
  dfs(world.root(), dfs);

  for (NodeId v : order) {
    const Node& nd = world.node(v);
    OutcomeProbs& o = out[static_cast<std::size_t>(v)];
    if (nd.kind == NodeKind::terminal_correct) {
      o = {1.0, 0.0, 0.0};
      continue;
    }
    if (nd.kind == NodeKind::terminal_incorrect) {
      o = {0.0, 1.0, 0.0};
      continue;
    }
    const std::vector<double> p = policy.probs(v);
    const auto toks = policy.legal_tokens(v);
    o = {0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < toks.size(); ++k) {
      if (toks[k] == world.resolve_token()) {
        o.p_resolve += p[k];
        continue;
      }
      const OutcomeProbs& c = out[static_cast<std::size_t>(nd.child(toks[k]))];
      o.p_correct += p[k] * c.p_correct;
      o.p_incorrect += p[k] * c.p_incorrect;
      o.p_resolve += p[k] * c.p_resolve;
    }
  }
  return out;
}

double correct_probability(const World& world, const Policy& policy, NodeId from) {
  return outcome_probabilities(world, policy)[static_cast<std::size_t>(from)].p_correct;
}

double oracle_value(const World& world, const Policy& policy, int redo_budget) {
  if (redo_budget < 1) throw ConfigError("redo budget must be >= 1");
  const OutcomeProbs root = outcome_probabilities(world, policy)[static_cast<std::size_t>(world.root())];
  double v = 0.0;
  for (int r = 0; r < redo_budget; ++r) v = root.p_correct + root.p_resolve * v;
  return v;
}

std::string World::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed_;
  j["params"] = {{"branch_count", params_.branch_count},
                 {"trap_fraction", params_.trap_fraction},
                 {"corridor_len_good", params_.corridor_len_good},
                 {"corridor_len_trap", params_.corridor_len_trap},
                 {"vocab_size", params_.vocab_size},
                 {"answers_max", params_.answers_max}};
  j["root"] = root_;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const Node& n : nodes_) {
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    for (const auto& [tok, dst] : n.edges) edges.push_back({tok, dst});
    arr.push_back({{"id", n.id}, {"kind", kind_name(n.kind)}, {"edges", edges}});
  }
  j["nodes"] = arr;
  return j.dump(2);
}

World World::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("world JSON parse failure: ") + e.what());
  }
  try {
    WorldParams p;
    const auto& jp = j.at("params");
    p.branch_count = jp.at("branch_count").get<int>();
    p.trap_fraction = jp.at("trap_fraction").get<double>();
    p.corridor_len_good = jp.at("corridor_len_good").get<int>();
    p.corridor_len_trap = jp.at("corridor_len_trap").get<int>();
    p.vocab_size = jp.at("vocab_size").get<int>();
    p.answers_max = jp.at("answers_max").get<int>();
    std::vector<Node> nodes;
    for (const auto& jn : j.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<NodeId>();
      n.kind = kind_from_name(jn.at("kind").get<std::string>());
      for (const auto& je : jn.at("edges"))
        n.edges.emplace_back(je.at(0).get<Token>(), je.at(1).get<NodeId>());
      nodes.push_back(std::move(n));
    }
    return World(j.at("seed").get<std::uint64_t>(), p, std::move(nodes), j.at("root").get<NodeId>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("world JSON missing field: ") + e.what());
  }
}

}  // namespace re2
