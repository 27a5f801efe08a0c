#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "re2/env.hpp"
#include "re2/policy.hpp"
#include "re2/rng.hpp"

using namespace re2;

namespace {

World three_branch_world(std::uint64_t seed = 2) {
  WorldParams p;
  p.branch_count = 3;
  p.trap_fraction = 0.34;
  p.corridor_len_good = 1;
  p.corridor_len_trap = 2;
  p.answers_max = 2;
  return generate_world(seed, p);
}

Policy randomized(const World& w, std::uint64_t seed) {
  Policy p(w);
  RngStream rng = make_stream(seed, {1});
  for (std::size_t i = 0; i < p.param_count(); ++i) p.set_param(i, 2.0 * rng.next_real() - 1.0);
  return p;
}

}  // namespace

TEST_CASE("log_prob: uniform logits over 4 legal tokens") {
  const World w = three_branch_world();
  const Policy p(w);  // zero logits; root has 3 edges + RESOLVE
  CHECK(p.active_count(w.root()) == 4);
  for (Token t : p.legal_tokens(w.root()))
    CHECK(p.log_prob(w.root(), t) == doctest::Approx(std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("log_prob: softmax shift identity on two tokens") {
  const World w = three_branch_world();
  // corridor nodes carry one edge plus RESOLVE
  const NodeId node = w.node(w.root()).edges[0].second;
  Policy p(w);
  const Token step = w.node(node).edges[0].first;
  p.set_logit(node, step, 0.3);
  p.set_logit(node, w.resolve_token(), 0.3 + 1.7);
  CHECK(p.log_prob(node, step) - p.log_prob(node, w.resolve_token()) ==
        doctest::Approx(-1.7).epsilon(1e-12));
}

TEST_CASE("log_prob: logits (1,2,3) give the known softmax") {
  const World w = three_branch_world();
  Policy p = Policy(w).with_resolve_masked(true);  // exactly the 3 branch tokens active
  for (Token t : {0, 1, 2}) p.set_logit(w.root(), t, 1.0 + t);
  const auto probs = p.probs(w.root());
  REQUIRE(probs.size() == 3);
  CHECK(probs[0] == doctest::Approx(0.090030573170).epsilon(1e-9));
  CHECK(probs[1] == doctest::Approx(0.244728471055).epsilon(1e-9));
  CHECK(probs[2] == doctest::Approx(0.665240955775).epsilon(1e-9));
}

TEST_CASE("log_prob: exp over legal tokens sums to one") {
  const World w = three_branch_world();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Policy p = randomized(w, seed);
    for (const Node& n : w.nodes()) {
      if (n.terminal()) continue;
      double sum = 0.0;
      for (Token t : p.legal_tokens(n.id)) sum += std::exp(p.log_prob(n.id, t));
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("log_prob: shift invariance within 1e-10") {
  const World w = three_branch_world();
  Policy p = randomized(w, 3);
  const NodeId node = w.root();
  std::vector<double> before;
  for (Token t : p.legal_tokens(node)) before.push_back(p.log_prob(node, t));
  for (Token t : p.legal_tokens(node)) p.add_to_logit(node, t, 17.25);
  std::size_t k = 0;
  for (Token t : p.legal_tokens(node))
    CHECK(p.log_prob(node, t) == doctest::Approx(before[k++]).epsilon(1e-10));
}

TEST_CASE("log_prob gradient matches central finite differences") {
  const World w = three_branch_world();
  RngStream pick = make_stream(9, {2});
  int checked = 0;
  while (checked < 100) {
    const Policy base = randomized(w, 100 + static_cast<std::uint64_t>(checked));
    const NodeId node = static_cast<NodeId>(pick.next_below(w.nodes().size()));
    if (w.node(node).terminal()) continue;
    const auto toks = base.legal_tokens(node);
    const Token tok = toks[pick.next_below(toks.size())];

    auto f = [&](const std::vector<double>& params) {
      Policy p = base;
      for (std::size_t i = 0; i < params.size(); ++i) p.set_param(i, params[i]);
      return p.log_prob(node, tok);
    };
    const std::vector<double> fd = oracles::finite_diff(f, base.logits(), 1e-5);

    std::vector<double> analytic(base.param_count(), 0.0);
    const std::vector<double> g = base.log_prob_grad(node, tok);
    for (std::size_t k = 0; k < toks.size(); ++k)
      analytic[base.param_index(node, toks[k])] = g[k];

    double err = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
      err += (fd[i] - analytic[i]) * (fd[i] - analytic[i]);
      norm += analytic[i] * analytic[i];
    }
    CHECK(std::sqrt(err) <= 1e-4 * std::max(std::sqrt(norm), 1.0));
    ++checked;
  }
}

TEST_CASE("sample_token: dominant logit wins every draw") {
  const World w = three_branch_world();
  Policy p(w);
  p.set_logit(w.root(), 1, 1000.0);
  RngStream rng = make_stream(4, {1});
  for (int i = 0; i < 10000; ++i) CHECK(p.sample_token(w.root(), rng) == 1);
}

TEST_CASE("sample_token: two uniform tokens are drawn half the time") {
  const World w = three_branch_world();
  const NodeId node = w.node(w.root()).edges[0].second;  // one edge + RESOLVE
  const Policy p(w);
  RngStream rng = make_stream(4, {2});
  int hits = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i)
    if (p.sample_token(node, rng) == w.resolve_token()) ++hits;
  CHECK(static_cast<double>(hits) / draws == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(static_cast<double>(hits) / draws - 0.5) < 0.01);
}

TEST_CASE("sample_token: identical stream state gives identical draws") {
  const World w = three_branch_world();
  const Policy p(w);
  RngStream a = make_stream(5, {3});
  RngStream b = make_stream(5, {3});
  for (int i = 0; i < 100; ++i) CHECK(p.sample_token(w.root(), a) == p.sample_token(w.root(), b));
}

TEST_CASE("sample_token: terminal node has no actions") {
  const World w = three_branch_world();
  const Policy p(w);
  NodeId terminal = kNoNode;
  for (const Node& n : w.nodes())
    if (n.terminal()) terminal = n.id;
  RngStream rng = make_stream(0, {0});
  CHECK_THROWS_AS(p.sample_token(terminal, rng), Error);
}

TEST_CASE("illegal tokens are masked") {
  const World w = three_branch_world();
  const Policy p(w);
  CHECK_THROWS_AS(p.log_prob(w.root(), static_cast<Token>(97)), MaskedTokenError);
  const Policy masked = p.with_resolve_masked(true);
  CHECK_THROWS_AS(masked.log_prob(w.root(), w.resolve_token()), MaskedTokenError);
  // masking renormalizes the remaining tokens
  double sum = 0.0;
  for (double v : masked.probs(w.root())) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(masked.active_count(w.root()) == 3);
}

TEST_CASE("snapshot: immutable under later updates") {
  const World w = three_branch_world();
  Policy p(w);
  const PolicySnapshot snap(p);
  const double before = snap.log_prob(w.root(), 0);
  p.add_to_logit(w.root(), 0, 1.0);
  CHECK(snap.log_prob(w.root(), 0) == before);
  CHECK(p.log_prob(w.root(), 0) != before);
}

TEST_CASE("snapshot: snapshotting a snapshot changes nothing") {
  const World w = three_branch_world();
  const Policy p = randomized(w, 8);
  const PolicySnapshot s1(p);
  const PolicySnapshot s2(s1.params());
  for (const Node& n : w.nodes()) {
    if (n.terminal()) continue;
    for (Token t : p.legal_tokens(n.id)) CHECK(s1.log_prob(n.id, t) == s2.log_prob(n.id, t));
  }
}

TEST_CASE("snapshot: diverges from the live policy only where updates landed") {
  const World w = three_branch_world();
  Policy live = randomized(w, 12);
  const PolicySnapshot snap(live);
  RngStream rng = make_stream(12, {5});
  std::vector<bool> touched(live.param_count(), false);
  for (int u = 0; u < 10; ++u) {
    const std::size_t idx = rng.next_below(live.param_count());
    live.add_to_param(idx, 0.5 + rng.next_real());
    touched[idx] = true;
  }
  for (std::size_t i = 0; i < live.param_count(); ++i) {
    if (touched[i])
      CHECK(live.logits()[i] != snap.params().logits()[i]);
    else
      CHECK(live.logits()[i] == snap.params().logits()[i]);
  }
}

TEST_CASE("temperature reshapes probabilities and must stay positive") {
  const World w = three_branch_world();
  Policy p(w);
  p.set_logit(w.root(), 0, 1.0);
  const double sharp = p.with_temperature(0.25).probs(w.root())[0];
  const double soft = p.with_temperature(4.0).probs(w.root())[0];
  CHECK(sharp > p.probs(w.root())[0]);
  CHECK(soft < p.probs(w.root())[0]);
  CHECK_THROWS_AS(p.set_temperature(0.0), ConfigError);
}

TEST_CASE("policy checkpoint JSON round trip and world compatibility") {
  const World w = three_branch_world(21);
  const Policy p = randomized(w, 21).with_temperature(0.6);
  const Policy back = Policy::from_json(w, p.to_json());
  CHECK(back == p);

  const World other = three_branch_world(22);
  CHECK_THROWS_AS(Policy::from_json(other, p.to_json()), IncompatibleError);
}
