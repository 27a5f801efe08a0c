#include "re2/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "re2/rollout.hpp"

namespace re2 {

void EvalConfig::validate() const {
  if (!(eval_temperature > 0.0)) throw ConfigError("eval_temperature must be > 0");
  if (restart_cap < 1) throw ConfigError("restart_cap must be >= 1");
  if (samples_per_query < 1) throw ConfigError("samples_per_query must be >= 1");
  if (difficulty_bins < 1) throw ConfigError("difficulty_bins must be >= 1");
  if (!(drop_threshold_low > 0.0 && drop_threshold_low < 1.0) ||
      !(drop_threshold_high > 0.0 && drop_threshold_high < 1.0))
    throw ConfigError("drop thresholds must be in (0, 1)");
  if (reference_samples < 1) throw ConfigError("reference_samples must be >= 1");
  for (double f : truncation_fractions)
    if (!(f >= 0.0 && f < 1.0)) throw ConfigError("truncation fractions must be in [0, 1)");
  if (scaling_ks.empty()) throw ConfigError("scaling_ks must not be empty");
  for (std::size_t i = 0; i + 1 < scaling_ks.size(); ++i)
    if (scaling_ks[i] >= scaling_ks[i + 1])
      throw ConfigError("scaling_ks must be strictly increasing");
  if (scaling_ks.front() < 1) throw ConfigError("scaling_ks must be >= 1");
  if (length_samples < 1) throw ConfigError("length_samples must be >= 1");
  if (drop_pool_samples < 1) throw ConfigError("drop_pool_samples must be >= 1");
  if (drop_prefix_samples < 0) throw ConfigError("drop_prefix_samples must be >= 0");
}

RestartEvaluator::RestartEvaluator(const World& world, const Policy& policy,
                                   const EvalConfig& cfg)
    : world_(world),
      cfg_(cfg),
      tempered_(policy.with_temperature(cfg.eval_temperature)),
      forced_(tempered_.with_resolve_masked(true)) {
  cfg_.validate();
}

Outcome RestartEvaluator::single_sample(RngStream& rng) const {
  PolicySnapshot snap(tempered_);
  return classify(world_, sample_full(world_, snap, rng).tokens);
}

InferResult RestartEvaluator::infer(RngStream& rng) const {
  PolicySnapshot snap(tempered_);
  for (int attempt = 1; attempt <= cfg_.restart_cap; ++attempt) {
    const Outcome out = classify(world_, sample_full(world_, snap, rng).tokens);
    if (!out.is_resolve()) return {out, attempt};
  }
  if (!cfg_.fallback_forced_answer)
    return {Outcome{OutcomeTag::incorrect, kNoNode}, cfg_.restart_cap};
  PolicySnapshot fsnap(forced_);
  const Outcome out = classify(world_, sample_full(world_, fsnap, rng).tokens);
  return {out, cfg_.restart_cap + 1};
}

InferResult infer_with_restarts(const World& world, const Policy& policy, const EvalConfig& cfg,
                                RngStream& rng) {
  return RestartEvaluator(world, policy, cfg).infer(rng);
}

double exact_pass_at_1(const World& world, const Policy& policy, const EvalConfig& cfg) {
  cfg.validate();
  const Policy tempered = policy.with_temperature(cfg.eval_temperature);
  const OutcomeProbs root =
      outcome_probabilities(world, tempered)[static_cast<std::size_t>(world.root())];
  double acc = 0.0;
  double resolve_mass = 1.0;
  for (int t = 0; t < cfg.restart_cap; ++t) {
    acc += resolve_mass * root.p_correct;
    resolve_mass *= root.p_resolve;
  }
  if (cfg.fallback_forced_answer) {
    const Policy forced = tempered.with_resolve_masked(true);
    const OutcomeProbs froot =
        outcome_probabilities(world, forced)[static_cast<std::size_t>(world.root())];
    acc += resolve_mass * froot.p_correct;
  }
  return acc;
}

double pass_at_1(std::span<const World> worlds, std::span<const Policy> policies,
                 const EvalConfig& cfg, std::uint64_t master_seed) {
  if (worlds.size() != policies.size())
    throw ConfigError("pass_at_1 needs one policy per world");
  double acc = 0.0;
  for (std::size_t q = 0; q < worlds.size(); ++q) {
    const RestartEvaluator ev(worlds[q], policies[q], cfg);
    int correct = 0;
    for (int s = 0; s < cfg.samples_per_query; ++s) {
      RngStream rng = make_stream(master_seed,
                                  {stream_tag::kEval, 1, worlds[q].seed(),
                                   static_cast<std::uint64_t>(s)});
      if (ev.infer(rng).outcome.is_correct()) ++correct;
    }
    acc += static_cast<double>(correct) / cfg.samples_per_query;
  }
  return acc / static_cast<double>(worlds.size());
}

namespace {

// Majority over the final-answer terminals in samples[0..k); ties break
// toward the earliest-seen terminal.
bool majority_correct(std::span<const Outcome> samples, int k, const World& world) {
  std::vector<NodeId> order;
  std::map<NodeId, int> votes;
  for (int s = 0; s < k; ++s) {
    const Outcome& o = samples[static_cast<std::size_t>(s)];
    if (o.is_resolve()) continue;
    if (votes.emplace(o.terminal, 0).second) order.push_back(o.terminal);
    ++votes[o.terminal];
  }
  if (order.empty()) return false;
  NodeId best = order.front();
  for (NodeId t : order)
    if (votes[t] > votes[best]) best = t;
  return world.node(best).kind == NodeKind::terminal_correct;
}

std::vector<Outcome> sample_pool(const World& world, const RestartEvaluator& ev, int count,
                                 std::uint64_t master_seed, std::uint64_t purpose) {
  std::vector<Outcome> out(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    RngStream rng = make_stream(master_seed,
                                {stream_tag::kEval, purpose, world.seed(),
                                 static_cast<std::uint64_t>(s)});
    out[static_cast<std::size_t>(s)] = ev.single_sample(rng);
  }
  return out;
}

}  // namespace

ScalingCurve scaling_curve(std::span<const World> worlds, std::span<const Policy> policies,
                           const EvalConfig& cfg, std::uint64_t master_seed) {
  cfg.validate();
  if (worlds.size() != policies.size())
    throw ConfigError("scaling_curve needs one policy per world");
  ScalingCurve curve;
  curve.sample_counts = cfg.scaling_ks;
  curve.accuracies.assign(curve.sample_counts.size(), 0.0);
  const int kmax = cfg.scaling_ks.back();
  for (std::size_t q = 0; q < worlds.size(); ++q) {
    const RestartEvaluator ev(worlds[q], policies[q], cfg);
    const std::vector<Outcome> pool = sample_pool(worlds[q], ev, kmax, master_seed, 2);
    for (std::size_t ki = 0; ki < curve.sample_counts.size(); ++ki)
      if (majority_correct(pool, curve.sample_counts[ki], worlds[q]))
        curve.accuracies[ki] += 1.0;
  }
  for (double& a : curve.accuracies) a /= static_cast<double>(worlds.size());
  return curve;
}

double majority_vote(std::span<const World> worlds, std::span<const Policy> policies, int k,
                     const EvalConfig& cfg, std::uint64_t master_seed) {
  if (k < 1) throw ConfigError("majority vote needs k >= 1");
  EvalConfig one = cfg;
  one.scaling_ks = {k};
  return scaling_curve(worlds, policies, one, master_seed).accuracies.front();
}

DifficultyReport difficulty_bins(std::span<const World> worlds,
                                 std::span<const Policy> reference_policies,
                                 std::span<const Policy> eval_policies, const EvalConfig& cfg,
                                 std::uint64_t master_seed) {
  cfg.validate();
  if (worlds.size() != reference_policies.size() || worlds.size() != eval_policies.size())
    throw ConfigError("difficulty_bins needs one reference and one eval policy per world");
  const int bins = cfg.difficulty_bins;
  std::vector<DifficultyBin> acc(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    acc[static_cast<std::size_t>(b)].index = b + 1;
    acc[static_cast<std::size_t>(b)].lo = static_cast<double>(b) / bins;
    acc[static_cast<std::size_t>(b)].hi = static_cast<double>(b + 1) / bins;
  }
  for (std::size_t q = 0; q < worlds.size(); ++q) {
    const RestartEvaluator ref(worlds[q], reference_policies[q], cfg);
    int ref_correct = 0;
    for (int s = 0; s < cfg.reference_samples; ++s) {
      RngStream rng = make_stream(master_seed,
                                  {stream_tag::kEval, 3, worlds[q].seed(),
                                   static_cast<std::uint64_t>(s)});
      if (ref.single_sample(rng).is_correct()) ++ref_correct;
    }
    const double ref_acc = static_cast<double>(ref_correct) / cfg.reference_samples;

    const RestartEvaluator ev(worlds[q], eval_policies[q], cfg);
    int correct = 0, resolves = 0;
    for (int s = 0; s < cfg.samples_per_query; ++s) {
      RngStream rng1 = make_stream(master_seed,
                                   {stream_tag::kEval, 4, worlds[q].seed(),
                                    static_cast<std::uint64_t>(s)});
      if (ev.infer(rng1).outcome.is_correct()) ++correct;
      RngStream rng2 = make_stream(master_seed,
                                   {stream_tag::kEval, 5, worlds[q].seed(),
                                    static_cast<std::uint64_t>(s)});
      if (ev.single_sample(rng2).is_resolve()) ++resolves;
    }

    const int idx = std::min(static_cast<int>(ref_acc * bins), bins - 1);
    DifficultyBin& bin = acc[static_cast<std::size_t>(idx)];
    ++bin.queries;
    bin.ref_accuracy += ref_acc;
    bin.accuracy += static_cast<double>(correct) / cfg.samples_per_query;
    bin.resolve_share += static_cast<double>(resolves) / cfg.samples_per_query;
  }
  DifficultyReport report;
  for (DifficultyBin& b : acc) {
    if (b.queries == 0) continue;  // absent, not zero
    b.ref_accuracy /= b.queries;
    b.accuracy /= b.queries;
    b.resolve_share /= b.queries;
    report.bins.push_back(b);
  }
  return report;
}

LengthReport length_accuracy_analysis(const World& world, const Policy& policy, int samples,
                                      std::uint64_t master_seed) {
  if (samples < 1) throw ConfigError("length analysis needs samples >= 1");
  LengthReport report;
  report.samples = samples;
  const PolicySnapshot snap(policy);
  std::map<int, LengthBin> bins;
  std::vector<double> lens, correct;
  for (int s = 0; s < samples; ++s) {
    RngStream rng = make_stream(master_seed,
                                {stream_tag::kEval, 6, world.seed(),
                                 static_cast<std::uint64_t>(s)});
    const FullRollout roll = sample_full(world, snap, rng);
    const Outcome out = classify(world, roll.tokens);
    const int len = static_cast<int>(roll.tokens.size());
    LengthBin& bin = bins.emplace(len, LengthBin{len, 0, 0.0, 0, 0.0}).first->second;
    ++bin.count;
    if (out.is_resolve()) continue;
    ++report.final_answers;
    ++bin.final_answers;
    if (out.is_correct()) bin.accuracy += 1.0;
    lens.push_back(static_cast<double>(len));
    correct.push_back(out.is_correct() ? 1.0 : 0.0);
  }
  for (auto& [len, bin] : bins) {
    bin.share = static_cast<double>(bin.count) / samples;
    if (bin.final_answers > 0) bin.accuracy /= bin.final_answers;
    report.bins.push_back(bin);
  }
  const double rho = spearman(lens, correct);
  report.correlation_defined = std::isfinite(rho);
  report.rank_correlation = report.correlation_defined ? rho : 0.0;
  return report;
}

DropReport prefix_drop_analysis(const World& world, const Policy& policy, const EvalConfig& cfg,
                                int pool_samples, int per_prefix_samples,
                                std::uint64_t master_seed) {
  cfg.validate();
  if (pool_samples < 1) throw ConfigError("drop analysis needs pool_samples >= 1");
  DropReport report;
  report.thresholds = {cfg.drop_threshold_low, cfg.drop_threshold_high};
  report.fractions = cfg.truncation_fractions;
  std::sort(report.fractions.begin(), report.fractions.end());
  report.all_drops.assign(report.thresholds.size(),
                          std::vector<int>(report.fractions.size(), 0));
  report.first_drops.assign(report.thresholds.size(),
                            std::vector<int>(report.fractions.size(), 0));

  const PolicySnapshot snap(policy);
  const std::vector<OutcomeProbs> dp = outcome_probabilities(world, policy);
  const double scratch_exact = dp[static_cast<std::size_t>(world.root())].p_correct;

  auto accuracy_from = [&](NodeId node, std::uint64_t key1, std::uint64_t key2) -> double {
    if (per_prefix_samples <= 0) return dp[static_cast<std::size_t>(node)].p_correct;
    int correct = 0;
    for (int s = 0; s < per_prefix_samples; ++s) {
      RngStream rng = make_stream(master_seed,
                                  {stream_tag::kEval, 7, world.seed(), key1, key2,
                                   static_cast<std::uint64_t>(s)});
      NodeId at = node;
      Outcome out{OutcomeTag::resolve, kNoNode};
      while (!world.node(at).terminal()) {
        const Token tok = snap.sample_token(at, rng);
        if (tok == world.resolve_token()) break;
        at = world.node(at).child(tok);
      }
      if (world.node(at).terminal())
        out = Outcome{world.node(at).kind == NodeKind::terminal_correct ? OutcomeTag::correct
                                                                        : OutcomeTag::incorrect,
                      at};
      if (out.is_correct()) ++correct;
    }
    return static_cast<double>(correct) / per_prefix_samples;
  };

  const double scratch = per_prefix_samples <= 0
                             ? scratch_exact
                             : accuracy_from(world.root(), ~0ULL, ~0ULL);
  if (scratch == 0.0) {
    report.excluded = 1;
    return report;
  }

  int traj_index = 0;
  for (int s = 0; s < pool_samples; ++s) {
    RngStream rng = make_stream(master_seed,
                                {stream_tag::kEval, 8, world.seed(),
                                 static_cast<std::uint64_t>(s)});
    const FullRollout roll = sample_full(world, snap, rng);
    const Outcome out = classify(world, roll.tokens);
    if (out.tag != OutcomeTag::incorrect) continue;
    ++report.pool;
    const int len = static_cast<int>(roll.tokens.size());
    std::vector<bool> first_done(report.thresholds.size(), false);
    for (std::size_t fi = 0; fi < report.fractions.size(); ++fi) {
      const int plen = static_cast<int>(std::floor(report.fractions[fi] * len));
      const std::vector<Token> prefix(roll.tokens.begin(), roll.tokens.begin() + plen);
      const NodeId node = walk(world, world.root(), prefix);
      const double acc = accuracy_from(node, static_cast<std::uint64_t>(traj_index),
                                       static_cast<std::uint64_t>(fi));
      const double drop = 1.0 - acc / scratch;
      for (std::size_t ti = 0; ti < report.thresholds.size(); ++ti) {
        if (drop > report.thresholds[ti]) {
          ++report.all_drops[ti][fi];
          if (!first_done[ti]) {
            ++report.first_drops[ti][fi];
            first_done[ti] = true;
          }
        }
      }
    }
    ++traj_index;
  }
  return report;
}

ResolveProfile resolve_profile(const World& world, const Policy& policy) {
  ResolveProfile prof;
  for (const Node& n : world.nodes()) {
    if (n.terminal() || n.id == world.root()) continue;
    const int branch = world.branch_of(n.id);
    if (branch < 0) continue;
    const auto toks = policy.legal_tokens(n.id);
    const std::vector<double> p = policy.probs(n.id);
    double p_res = 0.0;
    for (std::size_t k = 0; k < toks.size(); ++k)
      if (toks[k] == world.resolve_token()) p_res = p[k];
    if (world.branch_is_trap(branch)) {
      prof.trap_mean += p_res;
      ++prof.trap_nodes;
    } else {
      prof.good_mean += p_res;
      ++prof.good_nodes;
    }
  }
  if (prof.trap_nodes > 0) prof.trap_mean /= prof.trap_nodes;
  if (prof.good_nodes > 0) prof.good_mean /= prof.good_nodes;
  return prof;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return NAN;
  const std::vector<double> rx = ranks(x);
  const std::vector<double> ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return NAN;
  return sxy / std::sqrt(sxx * syy);
}

void write_scaling_csv(std::ostream& out, const ScalingCurve& curve) {
  out << "k,accuracy\n";
  for (std::size_t i = 0; i < curve.sample_counts.size(); ++i)
    out << curve.sample_counts[i] << ',' << curve.accuracies[i] << '\n';
}

void write_difficulty_csv(std::ostream& out, const DifficultyReport& report) {
  out << "bin,lo,hi,queries,ref_accuracy,accuracy,resolve_share\n";
  for (const DifficultyBin& b : report.bins)
    out << b.index << ',' << b.lo << ',' << b.hi << ',' << b.queries << ',' << b.ref_accuracy
        << ',' << b.accuracy << ',' << b.resolve_share << '\n';
}

void write_length_csv(std::ostream& out, const LengthReport& report) {
  out << "length,count,share,final_answers,accuracy\n";
  for (const LengthBin& b : report.bins)
    out << b.length << ',' << b.count << ',' << b.share << ',' << b.final_answers << ','
        << b.accuracy << '\n';
}

void write_drop_csv(std::ostream& out, const DropReport& report) {
  out << "threshold,fraction,all_drops,first_drops,pool,excluded\n";
  for (std::size_t ti = 0; ti < report.thresholds.size(); ++ti)
    for (std::size_t fi = 0; fi < report.fractions.size(); ++fi)
      out << report.thresholds[ti] << ',' << report.fractions[fi] << ','
          << report.all_drops[ti][fi] << ',' << report.first_drops[ti][fi] << ',' << report.pool
          << ',' << report.excluded << '\n';
}

}  // namespace re2
