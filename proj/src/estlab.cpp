#include "re2/estlab.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "re2/rollout.hpp"

namespace re2 {

namespace {

Outcome draw_outcome(const World& world, const PolicySnapshot& snap, RngStream& rng) {
  return classify(world, sample_full(world, snap, rng).tokens);
}

// Share of correct outcomes over (n-1) groups of m continuations, i.e. the
// out-of-group pool for a fixed target group.
double pool_estimate(const World& world, const PolicySnapshot& snap, int n, int m,
                     bool mixed_prefixes, RngStream& rng) {
  int correct = 0;
  const int pool_groups = n - 1;
  for (int g = 0; g < pool_groups; ++g) {
    NodeId start = world.root();
    if (mixed_prefixes) {
      const FullRollout full = sample_full(world, snap, rng);
      std::size_t walk_len = full.tokens.size();
      if (walk_len > 0 && full.tokens.back() == world.resolve_token()) --walk_len;
      const double ratio = 0.8 * rng.next_real();
      const std::size_t plen =
          static_cast<std::size_t>(std::floor(ratio * static_cast<double>(walk_len)));
      std::vector<Token> prefix(full.tokens.begin(),
                                full.tokens.begin() + static_cast<std::ptrdiff_t>(plen));
      start = walk(world, world.root(), prefix);
    }
    for (int j = 0; j < m; ++j) {
      NodeId at = start;
      bool resolved = false;
      while (!world.node(at).terminal()) {
        const Token tok = snap.sample_token(at, rng);
        if (tok == world.resolve_token()) {
          resolved = true;
          break;
        }
        at = world.node(at).child(tok);
      }
      if (!resolved && world.node(at).kind == NodeKind::terminal_correct) ++correct;
    }
  }
  return static_cast<double>(correct) / (pool_groups * m);
}

// Plain batch accuracy over an n*m empty-prefix pool; the EMA's observation.
double batch_accuracy(const World& world, const PolicySnapshot& snap, int n, int m,
                      RngStream& rng) {
  int correct = 0;
  for (int s = 0; s < n * m; ++s)
    if (draw_outcome(world, snap, rng).is_correct()) ++correct;
  return static_cast<double>(correct) / (n * m);
}

struct Moments {
  double bias = 0.0;
  double variance = 0.0;
  double mse = 0.0;
};

Moments moments_against(std::span<const double> estimates, double truth) {
  Moments out;
  const double n = static_cast<double>(estimates.size());
  double mean = 0.0;
  for (double e : estimates) mean += e;
  mean /= n;
  out.bias = mean - truth;
  for (double e : estimates) {
    out.variance += (e - mean) * (e - mean);
    out.mse += (e - truth) * (e - truth);
  }
  out.variance /= n;
  out.mse /= n;
  return out;
}

}  // namespace

double ground_truth_accuracy(const World& world, const Policy& policy, int trials,
                             std::uint64_t master_seed) {
  if (trials < 1) throw ConfigError("ground truth estimation needs trials >= 1");
  const PolicySnapshot snap(policy);
  int correct = 0;
  for (int s = 0; s < trials; ++s) {
    RngStream rng = make_stream(master_seed,
                                {stream_tag::kEstimator, 0, world.seed(),
                                 static_cast<std::uint64_t>(s)});
    if (draw_outcome(world, snap, rng).is_correct()) ++correct;
  }
  return static_cast<double>(correct) / trials;
}

void EstimatorSweepConfig::validate() const {
  if (repeats < 100) throw ConfigError("estimator sweep needs repeats >= 100");
  if (fixed_n < 2 || fixed_m < 1) throw ConfigError("fixed_n must be >= 2 and fixed_m >= 1");
  for (int n : n_values)
    if (n < 2) throw ConfigError("estimator sweep n values must be >= 2");
  for (int m : m_values)
    if (m < 1) throw ConfigError("estimator sweep m values must be >= 1");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ConfigError("ema_decay must be in (0, 1)");
}

std::vector<EstimatorReport> estimator_sweep(const World& world, const Policy& policy,
                                             const EstimatorSweepConfig& cfg,
                                             std::uint64_t master_seed) {
  cfg.validate();
  const PolicySnapshot snap(policy);
  const double truth =
      outcome_probabilities(world, policy)[static_cast<std::size_t>(world.root())].p_correct;

  std::vector<std::pair<int, int>> settings;
  for (int n : cfg.n_values) settings.emplace_back(n, cfg.fixed_m);
  for (int m : cfg.m_values) {
    const std::pair<int, int> s{cfg.fixed_n, m};
    bool dup = false;
    for (const auto& have : settings) dup = dup || have == s;
    if (!dup) settings.push_back(s);
  }

  std::vector<EstimatorReport> out;
  std::uint64_t setting_id = 1;
  for (const auto& [n, m] : settings) {
    for (const bool mixed : {false, true}) {
      if (mixed && !cfg.include_mixed_prefixes) continue;
      std::vector<double> est(static_cast<std::size_t>(cfg.repeats));
      for (int r = 0; r < cfg.repeats; ++r) {
        RngStream rng = make_stream(master_seed,
                                    {stream_tag::kEstimator, setting_id, world.seed(),
                                     static_cast<std::uint64_t>(r), mixed ? 1ULL : 0ULL});
        est[static_cast<std::size_t>(r)] = pool_estimate(world, snap, n, m, mixed, rng);
      }
      const Moments mo = moments_against(est, truth);
      EstimatorReport rep;
      std::ostringstream name;
      name << "n=" << n << ",m=" << m;
      if (mixed) name << ",mixed";
      rep.setting = name.str();
      rep.n = n;
      rep.m = m;
      rep.mixed_prefixes = mixed;
      rep.bias = mo.bias;
      rep.variance = mo.variance;
      rep.mse = mo.mse;
      rep.truth = truth;
      rep.trials = cfg.repeats;
      out.push_back(std::move(rep));
    }
    ++setting_id;
  }

  // EMA baseline: one simulated run of `repeats` steps, scored at every step.
  {
    EmaState ema{0.0, cfg.ema_decay, false};
    std::vector<double> est(static_cast<std::size_t>(cfg.repeats));
    for (int r = 0; r < cfg.repeats; ++r) {
      RngStream rng = make_stream(master_seed,
                                  {stream_tag::kEstimator, 999, world.seed(),
                                   static_cast<std::uint64_t>(r)});
      ema.update(batch_accuracy(world, snap, cfg.fixed_n, cfg.fixed_m, rng));
      est[static_cast<std::size_t>(r)] = ema.value;
    }
    const Moments mo = moments_against(est, truth);
    EstimatorReport rep;
    std::ostringstream name;
    name << "ema(" << cfg.ema_decay << ")";
    rep.setting = name.str();
    rep.decay = cfg.ema_decay;
    rep.bias = mo.bias;
    rep.variance = mo.variance;
    rep.mse = mo.mse;
    rep.truth = truth;
    rep.trials = cfg.repeats;
    out.push_back(std::move(rep));
  }
  return out;
}

NonstationaryResult nonstationary_comparison(const World& world, const Policy& before,
                                             const Policy& after, int n, int m, int warm_steps,
                                             int post_steps, double decay, int repeats,
                                             std::uint64_t master_seed) {
  if (warm_steps < 1 || post_steps < 1 || repeats < 1)
    throw ConfigError("nonstationary comparison needs positive step and repeat counts");
  const PolicySnapshot snap_before(before);
  const PolicySnapshot snap_after(after);
  NonstationaryResult out;
  out.truth_before =
      outcome_probabilities(world, before)[static_cast<std::size_t>(world.root())].p_correct;
  out.truth_after =
      outcome_probabilities(world, after)[static_cast<std::size_t>(world.root())].p_correct;

  double est_sq = 0.0, ema_sq = 0.0;
  int scored = 0;
  for (int r = 0; r < repeats; ++r) {
    RngStream rng = make_stream(master_seed,
                                {stream_tag::kEstimator, 1000, world.seed(),
                                 static_cast<std::uint64_t>(r)});
    EmaState ema{0.0, decay, false};
    for (int s = 0; s < warm_steps; ++s)
      ema.update(batch_accuracy(world, snap_before, n, m, rng));
    for (int s = 0; s < post_steps; ++s) {
      ema.update(batch_accuracy(world, snap_after, n, m, rng));
      const double est = pool_estimate(world, snap_after, n, m, false, rng);
      est_sq += (est - out.truth_after) * (est - out.truth_after);
      ema_sq += (ema.value - out.truth_after) * (ema.value - out.truth_after);
      ++scored;
    }
  }
  out.estimator_mse = est_sq / scored;
  out.ema_mse = ema_sq / scored;
  return out;
}

void write_sweep_csv(std::ostream& out, std::span<const EstimatorReport> reports) {
  out << "setting,n,m,decay,mixed_prefixes,bias,variance,mse,truth,trials\n";
  for (const EstimatorReport& r : reports)
    out << r.setting << ',' << r.n << ',' << r.m << ',' << r.decay << ','
        << (r.mixed_prefixes ? 1 : 0) << ',' << r.bias << ',' << r.variance << ',' << r.mse
        << ',' << r.truth << ',' << r.trials << '\n';
}

}  // namespace re2
