#include "re2/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace re2 {

struct Policy::Layout {
  std::uint64_t world_seed = 0;
  Token resolve_token = 0;
  std::vector<std::vector<Token>> legal;  // per node; empty for terminals
  std::vector<std::size_t> offset;        // param offset per node
  std::vector<bool> internal;
  std::size_t total = 0;
};

Policy::Policy(const World& world, double temperature) {
  auto layout = std::make_shared<Layout>();
  layout->world_seed = world.seed();
  layout->resolve_token = world.resolve_token();
  const std::size_t n = world.nodes().size();
  layout->legal.resize(n);
  layout->offset.resize(n);
  layout->internal.resize(n);
  std::size_t at = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Node& nd = world.node(static_cast<NodeId>(i));
    layout->offset[i] = at;
    layout->internal[i] = !nd.terminal();
    if (!nd.terminal()) {
      layout->legal[i] = world.legal_tokens(static_cast<NodeId>(i));
      at += layout->legal[i].size();
    }
  }
  layout->total = at;
  layout_ = std::move(layout);
  logits_.assign(layout_->total, 0.0);
  world_seed_ = layout_->world_seed;
  set_temperature(temperature);
}

void Policy::set_temperature(double t) {
  if (!(t > 0.0)) throw ConfigError("temperature must be > 0");
  temperature_ = t;
}

Policy Policy::with_temperature(double t) const {
  Policy p = *this;
  p.set_temperature(t);
  return p;
}

Policy Policy::with_resolve_masked(bool masked) const {
  Policy p = *this;
  p.resolve_masked_ = masked;
  return p;
}

void Policy::check_internal(NodeId node) const {
  if (node < 0 || static_cast<std::size_t>(node) >= layout_->internal.size() ||
      !layout_->internal[static_cast<std::size_t>(node)]) {
    std::ostringstream msg;
    msg << "node " << node << " has no actions";
    throw Error(msg.str());
  }
}

std::span<const Token> Policy::legal_tokens(NodeId node) const {
  check_internal(node);
  const auto& full = layout_->legal[static_cast<std::size_t>(node)];
  const std::size_t count = resolve_masked_ ? full.size() - 1 : full.size();
  return {full.data(), count};
}

int Policy::active_count(NodeId node) const {
  return static_cast<int>(legal_tokens(node).size());
}

int Policy::active_slot(NodeId node, Token token) const {
  const auto toks = legal_tokens(node);
  for (std::size_t k = 0; k < toks.size(); ++k)
    if (toks[k] == token) return static_cast<int>(k);
  std::ostringstream msg;
  msg << "token " << token << " is masked at node " << node;
  throw MaskedTokenError(msg.str());
}

std::vector<double> Policy::probs(NodeId node) const {
  const auto toks = legal_tokens(node);
  const std::size_t base = layout_->offset[static_cast<std::size_t>(node)];
  double hi = -INFINITY;
  for (std::size_t k = 0; k < toks.size(); ++k)
    hi = std::max(hi, logits_[base + k] / temperature_);
  std::vector<double> p(toks.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < toks.size(); ++k) {
    p[k] = std::exp(logits_[base + k] / temperature_ - hi);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

double Policy::log_prob(NodeId node, Token token) const {
  const int slot = active_slot(node, token);
  const auto toks = legal_tokens(node);
  const std::size_t base = layout_->offset[static_cast<std::size_t>(node)];
  double hi = -INFINITY;
  for (std::size_t k = 0; k < toks.size(); ++k)
    hi = std::max(hi, logits_[base + k] / temperature_);
  double sum = 0.0;
  for (std::size_t k = 0; k < toks.size(); ++k)
    sum += std::exp(logits_[base + k] / temperature_ - hi);
  return logits_[base + static_cast<std::size_t>(slot)] / temperature_ - hi - std::log(sum);
}

std::vector<double> Policy::log_prob_grad(NodeId node, Token token) const {
  const int slot = active_slot(node, token);
  std::vector<double> g = probs(node);
  for (std::size_t k = 0; k < g.size(); ++k)
    g[k] = ((static_cast<int>(k) == slot ? 1.0 : 0.0) - g[k]) / temperature_;
  return g;
}

Token Policy::sample_token(NodeId node, RngStream& rng) const {
  const auto toks = legal_tokens(node);
  const std::vector<double> p = probs(node);
  const double u = rng.next_real();
  double acc = 0.0;
  for (std::size_t k = 0; k < toks.size(); ++k) {
    acc += p[k];
    if (u < acc) return toks[k];
  }
  return toks.back();
}

std::size_t Policy::param_index(NodeId node, Token token) const {
  check_internal(node);
  const auto& full = layout_->legal[static_cast<std::size_t>(node)];
  for (std::size_t k = 0; k < full.size(); ++k)
    if (full[k] == token)
      return layout_->offset[static_cast<std::size_t>(node)] + k;
  std::ostringstream msg;
  msg << "token " << token << " is not legal at node " << node;
  throw MaskedTokenError(msg.str());
}

std::pair<NodeId, Token> Policy::param_location(std::size_t index) const {
  for (std::size_t i = 0; i < layout_->legal.size(); ++i) {
    const auto& full = layout_->legal[i];
    const std::size_t base = layout_->offset[i];
    if (!full.empty() && index >= base && index < base + full.size())
      return {static_cast<NodeId>(i), full[index - base]};
  }
  throw Error("parameter index out of range");
}

double Policy::logit(NodeId node, Token token) const { return logits_[param_index(node, token)]; }

void Policy::set_logit(NodeId node, Token token, double value) {
  logits_[param_index(node, token)] = value;
}

void Policy::add_to_logit(NodeId node, Token token, double delta) {
  logits_[param_index(node, token)] += delta;
}

void Policy::set_resolve_logits(double value) {
  for (std::size_t i = 0; i < layout_->legal.size(); ++i) {
    if (!layout_->internal[i]) continue;
    const auto& full = layout_->legal[i];
    logits_[layout_->offset[i] + full.size() - 1] = value;
  }
}

bool Policy::operator==(const Policy& other) const {
  return world_seed_ == other.world_seed_ && temperature_ == other.temperature_ &&
         resolve_masked_ == other.resolve_masked_ && logits_ == other.logits_;
}

std::string Policy::to_json() const {
  nlohmann::ordered_json j;
  j["world_seed"] = world_seed_;
  j["temperature"] = temperature_;
  j["resolve_masked"] = resolve_masked_;
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < layout_->legal.size(); ++i) {
    const auto& full = layout_->legal[i];
    for (std::size_t k = 0; k < full.size(); ++k)
      table.push_back({static_cast<NodeId>(i), full[k], logits_[layout_->offset[i] + k]});
  }
  j["logits"] = table;
  return j.dump(2);
}

Policy Policy::from_json(const World& world, const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("policy JSON parse failure: ") + e.what());
  }
  const auto seed = j.at("world_seed").get<std::uint64_t>();
  if (seed != world.seed()) {
    std::ostringstream msg;
    msg << "checkpoint world seed " << seed << " does not match world seed " << world.seed();
    throw IncompatibleError(msg.str());
  }
  Policy p(world, j.at("temperature").get<double>());
  p.resolve_masked_ = j.at("resolve_masked").get<bool>();
  for (const auto& row : j.at("logits"))
    p.set_logit(row.at(0).get<NodeId>(), row.at(1).get<Token>(), row.at(2).get<double>());
  return p;
}

}  // namespace re2
