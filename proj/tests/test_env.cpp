#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "re2/env.hpp"
#include "re2/policy.hpp"
#include "re2/rng.hpp"

using namespace re2;

namespace {

WorldParams classic_params() {
  WorldParams p;
  p.branch_count = 2;
  p.trap_fraction = 0.5;
  p.corridor_len_good = 1;
  p.corridor_len_trap = 2;
  p.answers_max = 1;
  return p;
}

// The 2-branch world with one sure-correct and one sure-incorrect branch.
World classic_world(std::uint64_t seed = 0) { return generate_world(seed, classic_params()); }

Policy no_resolve_uniform(const World& w) {
  Policy p(w);
  p.set_resolve_logits(-1000.0);  // exp underflows to exactly zero
  return p;
}

NodeId trap_entry(const World& w) {
  const int trap = w.branch_is_trap(0) ? 0 : 1;
  return w.node(w.root()).edges[static_cast<std::size_t>(trap)].second;
}

std::vector<Token> walk_to_terminal(const World& w, int branch) {
  std::vector<Token> toks{static_cast<Token>(branch)};
  NodeId at = w.node(w.root()).edges[static_cast<std::size_t>(branch)].second;
  while (!w.node(at).terminal()) {
    const Token t = w.node(at).edges.front().first;
    toks.push_back(t);
    at = w.node(at).child(t);
  }
  return toks;
}

}  // namespace

TEST_CASE("generate_world: trap count follows the rounding rule") {
  const World w = classic_world(0);
  CHECK(w.trap_branch_count() == 1);
  CHECK(w.branch_count() == 2);
  CHECK((w.branch_is_trap(0) != w.branch_is_trap(1)));
}

TEST_CASE("generate_world: identical seed and params give bit-identical worlds") {
  WorldParams p;
  p.branch_count = 4;
  p.trap_fraction = 0.5;
  p.corridor_len_good = 2;
  p.corridor_len_trap = 4;
  p.answers_max = 2;
  const World a = generate_world(7, p);
  const World b = generate_world(7, p);
  CHECK(a == b);
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("generate_world: mean trap branches over 100 seeds") {
  WorldParams p;
  p.branch_count = 4;
  p.trap_fraction = 0.5;
  p.corridor_len_good = 1;
  p.corridor_len_trap = 2;
  int traps = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    traps += generate_world(seed, p).trap_branch_count();
  CHECK(traps == 200);  // trap count is round(0.5 * 4) = 2 in every world
}

TEST_CASE("generate_world: rejects unsatisfiable parameter combinations") {
  WorldParams p = classic_params();
  p.trap_fraction = 1.0;
  CHECK_THROWS_AS(generate_world(0, p), ConfigError);

  p = classic_params();
  p.branch_count = 1;
  CHECK_THROWS_AS(generate_world(0, p), ConfigError);

  p = classic_params();
  p.vocab_size = 3;  // < branch_count + 2
  CHECK_THROWS_AS(generate_world(0, p), ConfigError);

  p = classic_params();
  p.corridor_len_trap = p.corridor_len_good;  // traps must be strictly longer
  CHECK_THROWS_AS(generate_world(0, p), ConfigError);

  p = classic_params();
  p.trap_fraction = 0.0;
  p.corridor_len_trap = p.corridor_len_good;  // fine without traps
  CHECK(generate_world(0, p).trap_branch_count() == 0);
}

TEST_CASE("generate_world: trap fraction clamps into [1, branches-1]") {
  WorldParams p = classic_params();
  p.trap_fraction = 0.9;  // round(1.8) = 2, clamped to 1 of 2 branches
  CHECK(generate_world(3, p).trap_branch_count() == 1);
}

TEST_CASE("world invariants: every path terminates within max_depth") {
  WorldParams p;
  p.branch_count = 3;
  p.trap_fraction = 0.34;
  p.corridor_len_good = 2;
  p.corridor_len_trap = 5;
  p.answers_max = 3;
  const World w = generate_world(11, p);
  const Policy uniform(w);
  for (const auto& rec : oracles::enumerate_paths(w, uniform))
    CHECK(rec.length <= w.max_depth());
  CHECK(w.max_depth() == p.corridor_len_trap + 2);
}

TEST_CASE("classify: terminal kinds and the resolve rule") {
  const World w = classic_world(0);
  const int good = w.branch_is_trap(0) ? 1 : 0;
  const int trap = 1 - good;

  CHECK(classify(w, walk_to_terminal(w, good)).tag == OutcomeTag::correct);
  CHECK(classify(w, walk_to_terminal(w, trap)).tag == OutcomeTag::incorrect);

  // resolve anywhere ends the trajectory with tag resolve
  CHECK(classify(w, {static_cast<Token>(good), w.resolve_token()}).tag == OutcomeTag::resolve);
  CHECK(classify(w, {w.resolve_token()}).tag == OutcomeTag::resolve);
}

TEST_CASE("classify: malformed trajectories are rejected") {
  const World w = classic_world(0);
  CHECK_THROWS_AS(classify(w, {static_cast<Token>(99)}), MalformedTrajectoryError);
  // stopping at an internal node is not a complete trajectory
  CHECK_THROWS_AS(classify(w, {static_cast<Token>(0)}), MalformedTrajectoryError);
  // walking past a terminal
  auto full = walk_to_terminal(w, 0);
  full.push_back(0);
  CHECK_THROWS_AS(classify(w, full), MalformedTrajectoryError);
  // resolve not at the end
  std::vector<Token> bad{w.resolve_token(), 0};
  CHECK_THROWS_AS(classify(w, bad), MalformedTrajectoryError);
}

TEST_CASE("oracle_value: sure-correct/sure-incorrect world, uniform, R=1") {
  const World w = classic_world(0);
  const Policy p = no_resolve_uniform(w);
  CHECK(oracle_value(w, p, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("oracle_value: resolving on trap entry, R=2 gives 0.75") {
  const World w = classic_world(0);
  Policy p = no_resolve_uniform(w);
  p.set_logit(trap_entry(w), w.resolve_token(), 1000.0);
  CHECK(oracle_value(w, p, 2) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(oracle_value(w, p, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("oracle_value: monotone non-decreasing in the redo budget") {
  WorldParams p;
  p.branch_count = 3;
  p.trap_fraction = 0.4;
  p.corridor_len_good = 1;
  p.corridor_len_trap = 3;
  p.answers_max = 2;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const World w = generate_world(seed, p);
    Policy pol(w);
    RngStream rng = make_stream(seed, {42});
    for (std::size_t i = 0; i < pol.param_count(); ++i)
      pol.set_param(i, 2.0 * rng.next_real() - 1.0);
    double prev = 0.0;
    for (int r = 1; r <= 6; ++r) {
      const double v = oracle_value(w, pol, r);
      CHECK(v >= prev - 1e-15);
      prev = v;
    }
  }
  CHECK_THROWS_AS(oracle_value(generate_world(0, p), Policy(generate_world(0, p)), 0),
                  ConfigError);
}

TEST_CASE("sampled trajectories always classify to exactly one outcome") {
  WorldParams params;
  params.branch_count = 4;
  params.trap_fraction = 0.5;
  params.corridor_len_good = 1;
  params.corridor_len_trap = 3;
  params.answers_max = 2;
  const World w = generate_world(5, params);
  const Policy pol(w);  // uniform, resolve active
  RngStream rng = make_stream(5, {7});
  for (int s = 0; s < 2000; ++s) {
    std::vector<Token> traj;
    NodeId at = w.root();
    while (!w.node(at).terminal()) {
      const Token t = pol.sample_token(at, rng);
      traj.push_back(t);
      if (t == w.resolve_token()) break;
      at = w.node(at).child(t);
    }
    const Outcome out = classify(w, traj);
    CHECK((out.tag == OutcomeTag::correct || out.tag == OutcomeTag::incorrect ||
           out.tag == OutcomeTag::resolve));
  }
}

TEST_CASE("trap corridors make incorrect trajectories longer on average") {
  WorldParams p;
  p.branch_count = 3;
  p.trap_fraction = 0.34;
  p.corridor_len_good = 1;
  p.corridor_len_trap = 4;
  p.answers_max = 2;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const World w = generate_world(seed, p);
    const Policy uniform(w);
    const auto paths = oracles::enumerate_paths(w, uniform);
    const double len_inc = oracles::exact_mean_length(paths, OutcomeTag::incorrect);
    const double len_cor = oracles::exact_mean_length(paths, OutcomeTag::correct);
    CHECK(len_inc > len_cor);
  }
}

TEST_CASE("world JSON round trip") {
  WorldParams p;
  p.branch_count = 4;
  p.trap_fraction = 0.25;
  p.corridor_len_good = 2;
  p.corridor_len_trap = 3;
  p.answers_max = 2;
  const World w = generate_world(13, p);
  const World back = World::from_json(w.to_json());
  CHECK(w == back);
  CHECK(back.trap_branch_count() == w.trap_branch_count());
  CHECK(back.max_depth() == w.max_depth());
}

TEST_CASE("world JSON rejects corrupt documents") {
  CHECK_THROWS_AS(World::from_json("{not json"), ConfigError);
  CHECK_THROWS_AS(World::from_json("{\"seed\": 1}"), ConfigError);
  const World w = classic_world(0);
  std::string txt = w.to_json();
  const auto pos = txt.find("terminal_correct");
  txt.replace(pos, 16, "terminal_corrupt");
  CHECK_THROWS_AS(World::from_json(txt), ConfigError);
}
