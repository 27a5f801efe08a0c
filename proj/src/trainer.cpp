#include "re2/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include <json.hpp>

#include "re2/parallel.hpp"

namespace re2 {

const char* train_mode_name(TrainMode mode) {
  return mode == TrainMode::re2 ? "re2" : "dapo-baseline";
}

TrainMode train_mode_from_name(const std::string& name) {
  if (name == "re2") return TrainMode::re2;
  if (name == "dapo-baseline") return TrainMode::dapo_baseline;
  throw ConfigError("unknown mode '" + name + "' (expected re2 or dapo-baseline)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be positive");
  if (batch_queries < 1) throw ConfigError("batch_queries must be >= 1");
  if (n < 2) throw ConfigError("n must be >= 2");
  if (m < 2) throw ConfigError("m must be >= 2");
  if (R < 1) throw ConfigError("R must be >= 1");
  if (!(eps_low > 0.0) || !(eps_high > 0.0))
    throw ConfigError("eps_low and eps_high must be > 0");
  if (eps_low >= 1.0) throw ConfigError("eps_low must be < 1");
  if (mu < 1) throw ConfigError("mu must be >= 1");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (baseline_batch_queries < 1) throw ConfigError("baseline_batch_queries must be >= 1");
  if (baseline_samples < 2) throw ConfigError("baseline_samples must be >= 2");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

int AdvantageTable::degenerate_count() const {
  return static_cast<int>(std::count(degenerate.begin(), degenerate.end(), true));
}

AdvantageTable compute_advantages(const RewardAssignment& rewards, int m) {
  AdvantageTable out;
  const std::size_t n = rewards.rewards.size();
  out.advantages.resize(n);
  out.degenerate.resize(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rewards.rewards[i];
    if (static_cast<int>(r.size()) != m)
      throw Error("every group must carry exactly m rewards");

    // Degeneracy is "all rewards identical", checked exactly; a group of
    // identical values must not be normalized by a rounding-level std.
    const bool all_equal = std::all_of(r.begin(), r.end(), [&](double v) { return v == r[0]; });
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(m);
    const double std_dev = std::sqrt(var);

    if (all_equal || std_dev == 0.0) {
      out.degenerate[i] = true;
      const auto& tags = rewards.outcomes[i];
      if (std::all_of(tags.begin(), tags.end(),
                      [&](OutcomeTag t) { return t == tags[0]; })) {
        switch (tags[0]) {
          case OutcomeTag::correct: ++out.breakdown.all_correct; break;
          case OutcomeTag::incorrect: ++out.breakdown.all_incorrect; break;
          case OutcomeTag::resolve: ++out.breakdown.all_resolve; break;
        }
      }
      continue;
    }
    auto& adv = out.advantages[i];
    adv.reserve(r.size());
    for (double v : r) adv.push_back((v - mean) / std_dev);
  }
  return out;
}

namespace {

struct SurrogateAccum {
  double objective = 0.0;
  std::vector<double>* grad = nullptr;
};

void accumulate_surrogate(const Policy& live, const PolicySnapshot& snap,
                          std::span<const PrefixGroup> groups, const AdvantageTable& adv,
                          double eps_low, double eps_high, SurrogateAccum& acc) {
  if (groups.size() != adv.degenerate.size())
    throw Error("advantage table does not match the group batch");
  std::size_t total_continuations = 0;
  for (const PrefixGroup& g : groups) total_continuations += g.continuations.size();
  if (total_continuations == 0) return;
  const double batch_w = 1.0 / static_cast<double>(total_continuations);

  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (adv.degenerate[i]) continue;
    const auto& conts = groups[i].continuations;
    for (std::size_t j = 0; j < conts.size(); ++j) {
      const Continuation& c = conts[j];
      const double a_hat = adv.advantages[i][j];
      const double w = batch_w / static_cast<double>(c.tokens.size());
      for (std::size_t t = 0; t < c.tokens.size(); ++t) {
        const NodeId node = c.nodes[t];
        const Token tok = c.tokens[t];
        const double blp = c.behavior_log_probs[t];
        if (std::abs(snap.log_prob(node, tok) - blp) > 1e-9)
          throw StaleBatchError("behavior log-probs do not match the snapshot");
        const double rho = std::exp(live.log_prob(node, tok) - blp);
        const double unclipped = rho * a_hat;
        const double clipped = std::clamp(rho, 1.0 - eps_low, 1.0 + eps_high) * a_hat;
        acc.objective += w * std::min(unclipped, clipped);
        if (acc.grad && unclipped <= clipped) {
          const std::vector<double> g = live.log_prob_grad(node, tok);
          const auto toks = live.legal_tokens(node);
          const double coef = w * a_hat * rho;
          for (std::size_t k = 0; k < toks.size(); ++k)
            (*acc.grad)[live.param_index(node, toks[k])] += coef * g[k];
        }
      }
    }
  }
}

}  // namespace

double surrogate_objective(const Policy& live, const PolicySnapshot& snap,
                           std::span<const PrefixGroup> groups, const AdvantageTable& adv,
                           double eps_low, double eps_high) {
  SurrogateAccum acc;
  accumulate_surrogate(live, snap, groups, adv, eps_low, eps_high, acc);
  return acc.objective;
}

SurrogateEval surrogate_eval(const Policy& live, const PolicySnapshot& snap,
                             std::span<const PrefixGroup> groups, const AdvantageTable& adv,
                             double eps_low, double eps_high) {
  SurrogateEval out;
  out.gradient.assign(live.param_count(), 0.0);
  SurrogateAccum acc;
  acc.grad = &out.gradient;
  accumulate_surrogate(live, snap, groups, adv, eps_low, eps_high, acc);
  out.objective = acc.objective;
  return out;
}

std::string StepMetrics::to_jsonl() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["mean_reward"] = mean_reward;
  j["resolve_reward"] = resolve_reward;
  j["share_correct"] = share_correct;
  j["share_incorrect"] = share_incorrect;
  j["share_resolve"] = share_resolve;
  j["degenerate_rate"] = degenerate_rate;
  j["degenerate_all_correct"] = degenerate_all_correct;
  j["degenerate_all_incorrect"] = degenerate_all_incorrect;
  j["degenerate_all_resolve"] = degenerate_all_resolve;
  j["tokens_generated"] = tokens_generated;
  j["mean_len_correct"] = mean_len_correct;
  j["mean_len_incorrect"] = mean_len_incorrect;
  j["mean_len_resolve"] = mean_len_resolve;
  return j.dump();
}

Trainer::Trainer(std::vector<World> worlds, TrainConfig config, std::uint64_t master_seed)
    : worlds_(std::move(worlds)), config_(config), master_seed_(master_seed) {
  config_.validate();
  if (worlds_.empty()) throw ConfigError("training needs at least one query world");
  const bool masked = config_.mode == TrainMode::dapo_baseline && config_.baseline_mask_resolve;
  policies_.reserve(worlds_.size());
  snapshots_.reserve(worlds_.size());
  for (const World& w : worlds_) {
    Policy p(w, 1.0);
    p.set_resolve_logits(config_.resolve_logit_init);
    if (masked) p = p.with_resolve_masked(true);
    policies_.push_back(std::move(p));
    snapshots_.emplace_back(policies_.back());
  }
}

std::vector<std::size_t> Trainer::select_batch() {
  const int want = config_.mode == TrainMode::re2 ? config_.batch_queries
                                                  : config_.baseline_batch_queries;
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(want), worlds_.size());
  std::vector<std::size_t> ids(worlds_.size());
  std::iota(ids.begin(), ids.end(), 0);
  RngStream rng = make_stream(master_seed_,
                              {stream_tag::kBatchSelect, static_cast<std::uint64_t>(step_)});
  for (std::size_t i = 0; i < batch; ++i) {
    std::size_t j = i + rng.next_below(ids.size() - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(batch);
  std::sort(ids.begin(), ids.end());
  return ids;
}

StepMetrics Trainer::step() {
  const auto selected = select_batch();
  const bool re2_mode = config_.mode == TrainMode::re2;
  const std::uint64_t round = static_cast<std::uint64_t>(step_);

  struct QueryBatch {
    std::vector<PrefixGroup> groups;
    AdvantageTable adv;
    RewardAssignment rewards;
    TokenBudget budget;
  };
  std::vector<QueryBatch> batch(selected.size());

  parallel_for(selected.size(), [&](std::size_t s) {
    const std::size_t q = selected[s];
    QueryBatch& qb = batch[s];
    if (re2_mode) {
      QueryRollout roll = collect_query(worlds_[q], snapshots_[q], config_.n, config_.m,
                                        master_seed_, round);
      qb.groups = std::move(roll.groups);
      qb.budget = roll.budget;
    } else {
      Prefix scratch;
      scratch.query = worlds_[q].seed();
      scratch.node = worlds_[q].root();
      PrefixGroup g = sample_continuations(worlds_[q], snapshots_[q], scratch,
                                           config_.baseline_samples, master_seed_, round, 0);
      for (const Continuation& c : g.continuations)
        qb.budget.continuation_tokens += c.tokens.size();
      qb.groups.push_back(std::move(g));
    }
    qb.rewards = assign_rewards(qb.groups, config_.R,
                                re2_mode ? RewardMode::re2 : RewardMode::binary_baseline);
    qb.adv = compute_advantages(qb.rewards, re2_mode ? config_.m : config_.baseline_samples);
  });

  // Metrics over every continuation in the batch.
  StepMetrics met;
  TokenBudget step_budget;
  double reward_sum = 0.0, resolve_reward_sum = 0.0;
  std::uint64_t conts = 0, n_resolve = 0, n_correct = 0, n_incorrect = 0;
  std::uint64_t len_sum[3] = {0, 0, 0};
  int groups_total = 0, groups_degenerate = 0;
  DegenerateBreakdown breakdown;
  for (const QueryBatch& qb : batch) {
    step_budget += qb.budget;
    groups_total += qb.adv.group_count();
    groups_degenerate += qb.adv.degenerate_count();
    breakdown.all_correct += qb.adv.breakdown.all_correct;
    breakdown.all_incorrect += qb.adv.breakdown.all_incorrect;
    breakdown.all_resolve += qb.adv.breakdown.all_resolve;
    for (std::size_t i = 0; i < qb.groups.size(); ++i) {
      const auto& g = qb.groups[i];
      for (std::size_t j = 0; j < g.continuations.size(); ++j) {
        const Continuation& c = g.continuations[j];
        const double r = qb.rewards.rewards[i][j];
        const std::uint64_t len = g.prefix.tokens.size() + c.tokens.size();
        reward_sum += r;
        ++conts;
        switch (c.outcome.tag) {
          case OutcomeTag::correct: ++n_correct; len_sum[0] += len; break;
          case OutcomeTag::incorrect: ++n_incorrect; len_sum[1] += len; break;
          case OutcomeTag::resolve:
            ++n_resolve;
            len_sum[2] += len;
            resolve_reward_sum += r;
            break;
        }
      }
    }
  }

  if (groups_total > 0 && groups_degenerate == groups_total)
    std::cerr << "[trainer] step " << (step_ + 1)
              << ": all groups degenerate, no-op update\n";

  // mu ascent iterations on the batch-mean objective. Parameter tables are
  // disjoint across queries, so per-query updates commute.
  const double scale = config_.learning_rate / static_cast<double>(selected.size());
  for (int it = 0; it < config_.mu; ++it) {
    parallel_for(selected.size(), [&](std::size_t s) {
      const std::size_t q = selected[s];
      const SurrogateEval ev = surrogate_eval(policies_[q], snapshots_[q], batch[s].groups,
                                              batch[s].adv, config_.eps_low, config_.eps_high);
      for (std::size_t p = 0; p < ev.gradient.size(); ++p)
        policies_[q].add_to_param(p, scale * ev.gradient[p]);
    });
  }
  for (std::size_t q : selected) snapshots_[q] = PolicySnapshot(policies_[q]);

  ++step_;
  cumulative_tokens_ += step_budget.total();

  met.step = step_;
  met.tokens_generated = step_budget.total();
  if (conts > 0) {
    met.mean_reward = reward_sum / static_cast<double>(conts);
    met.share_correct = static_cast<double>(n_correct) / static_cast<double>(conts);
    met.share_incorrect = static_cast<double>(n_incorrect) / static_cast<double>(conts);
    met.share_resolve = static_cast<double>(n_resolve) / static_cast<double>(conts);
  }
  if (n_resolve > 0)
    met.resolve_reward = resolve_reward_sum / static_cast<double>(n_resolve);
  if (groups_total > 0) {
    met.degenerate_rate = static_cast<double>(groups_degenerate) / groups_total;
    met.degenerate_all_correct = static_cast<double>(breakdown.all_correct) / groups_total;
    met.degenerate_all_incorrect = static_cast<double>(breakdown.all_incorrect) / groups_total;
    met.degenerate_all_resolve = static_cast<double>(breakdown.all_resolve) / groups_total;
  }
  if (n_correct > 0) met.mean_len_correct = static_cast<double>(len_sum[0]) / n_correct;
  if (n_incorrect > 0) met.mean_len_incorrect = static_cast<double>(len_sum[1]) / n_incorrect;
  if (n_resolve > 0) met.mean_len_resolve = static_cast<double>(len_sum[2]) / n_resolve;
  return met;
}

TrainConfig equalize_budget(const TrainConfig& re2_config, TrainConfig baseline_config) {
  re2_config.validate();
  baseline_config.validate();
  const double re2_count = static_cast<double>(re2_config.batch_queries) * re2_config.n *
                           (1.0 + re2_config.m);
  const double base_count = static_cast<double>(baseline_config.baseline_batch_queries) *
                            baseline_config.baseline_samples;
  const double ratio = re2_count / base_count;
  const long samples = std::lround(baseline_config.baseline_samples * ratio);
  if (samples < 2)
    throw ConfigError("budget equalization would need < 2 baseline samples per query");
  baseline_config.baseline_samples = static_cast<int>(samples);
  return baseline_config;
}

TrainConfig equalize_budget_measured(double re2_tokens_per_step, TrainConfig baseline_config,
                                     double baseline_mean_trajectory_len) {
  baseline_config.validate();
  if (!(re2_tokens_per_step > 0.0) || !(baseline_mean_trajectory_len > 0.0))
    throw ConfigError("measured budget equalization needs positive token figures");
  const long samples = std::lround(
      re2_tokens_per_step /
      (static_cast<double>(baseline_config.baseline_batch_queries) * baseline_mean_trajectory_len));
  if (samples < 2)
    throw ConfigError("budget equalization would need < 2 baseline samples per query");
  baseline_config.baseline_samples = static_cast<int>(samples);
  return baseline_config;
}

}  // namespace re2
