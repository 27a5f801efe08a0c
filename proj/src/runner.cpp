#include "re2/runner.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "re2/eval.hpp"

namespace re2 {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// A fresh directory per run; prior runs are never mutated.
fs::path unique_run_dir(const fs::path& base, const std::string& command,
                        const RunConfig& cfg) {
  std::ostringstream name;
  name << command << "-s" << cfg.seed << "-" << hash_hex(cfg.config_hash()).substr(0, 8);
  fs::path dir = base / name.str();
  int suffix = 2;
  while (fs::exists(dir)) dir = base / (name.str() + "-" + std::to_string(suffix++));
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file " + path.string());
  return out;
}

void write_manifest(RunArtifacts& art, const std::string& command, const RunConfig& cfg,
                    int start_step, int end_step) {
  ordered_json j;
  j["artifact_version"] = kArtifactVersion;
  j["command"] = command;
  j["config_hash"] = hash_hex(cfg.config_hash());
  j["master_seed"] = cfg.seed;
  j["start_step"] = start_step;
  j["end_step"] = end_step;
  ordered_json outputs;
  for (const auto& [name, path] : art.outputs)
    outputs[name] = fs::relative(path, art.run_dir).string();
  j["outputs"] = outputs;
  j["config"] = ordered_json::parse(cfg.canonical_json());
  art.manifest = art.run_dir / "manifest.json";
  open_out(art.manifest) << j.dump(2) << '\n';
}

double exact_mean_pass1(const std::vector<World>& worlds, const std::vector<Policy>& policies,
                        const EvalConfig& cfg) {
  double acc = 0.0;
  for (std::size_t q = 0; q < worlds.size(); ++q)
    acc += exact_pass_at_1(worlds[q], policies[q], cfg);
  return acc / static_cast<double>(worlds.size());
}

}  // namespace

void save_checkpoint(const fs::path& path, const RunConfig& cfg, const std::vector<World>& worlds,
                     const std::vector<Policy>& policies, int step) {
  ordered_json j;
  j["artifact_version"] = kArtifactVersion;
  j["step"] = step;
  j["world_seed_base"] = cfg.world_seed_base;
  j["queries"] = cfg.queries;
  j["world_params"] = {{"branch_count", cfg.world.branch_count},
                       {"trap_fraction", cfg.world.trap_fraction},
                       {"corridor_len_good", cfg.world.corridor_len_good},
                       {"corridor_len_trap", cfg.world.corridor_len_trap},
                       {"vocab_size", worlds.front().params().vocab_size},
                       {"answers_max", cfg.world.answers_max}};
  ordered_json pol = ordered_json::array();
  for (const Policy& p : policies) pol.push_back(ordered_json::parse(p.to_json()));
  j["policies"] = pol;
  open_out(path) << j.dump(2) << '\n';
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint parse failure: ") + e.what());
  }
  Checkpoint ck;
  try {
    ck.step = j.at("step").get<int>();
    ck.world_seed_base = j.at("world_seed_base").get<std::uint64_t>();
    ck.queries = j.at("queries").get<int>();
    const auto& jp = j.at("world_params");
    ck.world_params.branch_count = jp.at("branch_count").get<int>();
    ck.world_params.trap_fraction = jp.at("trap_fraction").get<double>();
    ck.world_params.corridor_len_good = jp.at("corridor_len_good").get<int>();
    ck.world_params.corridor_len_trap = jp.at("corridor_len_trap").get<int>();
    ck.world_params.vocab_size = jp.at("vocab_size").get<int>();
    ck.world_params.answers_max = jp.at("answers_max").get<int>();
    for (const auto& p : j.at("policies")) ck.policy_json.push_back(p.dump());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint missing field: ") + e.what());
  }
  return ck;
}

std::vector<Policy> load_policies(const Checkpoint& ck, const RunConfig& cfg,
                                  const std::vector<World>& worlds) {
  if (ck.world_seed_base != cfg.world_seed_base) {
    std::ostringstream msg;
    msg << "checkpoint world seed base " << ck.world_seed_base
        << " does not match configured seed base " << cfg.world_seed_base;
    throw IncompatibleError(msg.str());
  }
  if (ck.queries != cfg.queries)
    throw IncompatibleError("checkpoint query count does not match the config");
  WorldParams expected = cfg.world;
  if (expected.vocab_size == 0) expected.vocab_size = worlds.front().params().vocab_size;
  if (!(ck.world_params == expected))
    throw IncompatibleError("checkpoint world parameters do not match the config");
  if (ck.policy_json.size() != worlds.size())
    throw IncompatibleError("checkpoint policy count does not match the world pool");
  std::vector<Policy> out;
  out.reserve(worlds.size());
  for (std::size_t q = 0; q < worlds.size(); ++q)
    out.push_back(Policy::from_json(worlds[q], ck.policy_json[q]));
  return out;
}

RunArtifacts run_train(const RunConfig& cfg, const fs::path& out_base) {
  cfg.validate();
  RunArtifacts art;
  art.run_dir = unique_run_dir(out_base, "train", cfg);

  std::vector<World> worlds = cfg.build_worlds();
  Trainer trainer(worlds, cfg.train, cfg.seed);

  const fs::path metrics_path = art.run_dir / "metrics.jsonl";
  art.outputs["metrics"] = metrics_path;
  {
    std::ofstream metrics = open_out(metrics_path);
    for (int s = 0; s < cfg.train.max_steps; ++s) {
      const StepMetrics met = trainer.step();
      metrics << met.to_jsonl() << '\n';
      if (cfg.train.checkpoint_every > 0 && met.step % cfg.train.checkpoint_every == 0 &&
          met.step != cfg.train.max_steps) {
        const fs::path ck = art.run_dir / ("checkpoint_step" + std::to_string(met.step) + ".json");
        save_checkpoint(ck, cfg, trainer.worlds(), trainer.policies(), met.step);
        art.outputs["checkpoint_step" + std::to_string(met.step)] = ck;
      }
    }
  }
  const fs::path final_ck = art.run_dir / "checkpoint.json";
  save_checkpoint(final_ck, cfg, trainer.worlds(), trainer.policies(), trainer.steps_done());
  art.outputs["checkpoint"] = final_ck;

  write_manifest(art, "train", cfg, 0, trainer.steps_done());
  return art;
}

RunArtifacts run_eval(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& out_base) {
  cfg.validate();
  RunArtifacts art;
  art.run_dir = unique_run_dir(out_base, "eval", cfg);

  const std::vector<World> worlds = cfg.build_worlds();
  const Checkpoint ck = read_checkpoint(checkpoint);
  const std::vector<Policy> policies = load_policies(ck, cfg, worlds);

  // pass@1 with restarts, MC plus the exact DP value.
  ordered_json summary;
  summary["pass_at_1"] = pass_at_1(worlds, policies, cfg.eval, cfg.seed);
  summary["pass_at_1_exact"] = exact_mean_pass1(worlds, policies, cfg.eval);
  ordered_json per_query = ordered_json::array();
  for (std::size_t q = 0; q < worlds.size(); ++q) {
    const ResolveProfile prof = resolve_profile(worlds[q], policies[q]);
    per_query.push_back({{"world_seed", worlds[q].seed()},
                         {"pass_at_1_exact", exact_pass_at_1(worlds[q], policies[q], cfg.eval)},
                         {"resolve_prob_trap_nodes", prof.trap_mean},
                         {"resolve_prob_good_nodes", prof.good_mean}});
  }
  summary["per_query"] = per_query;
  const fs::path summary_path = art.run_dir / "summary.json";
  open_out(summary_path) << summary.dump(2) << '\n';
  art.outputs["summary"] = summary_path;

  {
    const fs::path p = art.run_dir / "scaling_curve.csv";
    auto out = open_out(p);
    write_scaling_csv(out, scaling_curve(worlds, policies, cfg.eval, cfg.seed));
    art.outputs["scaling_curve"] = p;
  }
  {
    std::vector<Policy> reference;
    reference.reserve(worlds.size());
    for (const World& w : worlds) reference.push_back(cfg.initial_policy(w));
    const fs::path p = art.run_dir / "difficulty_bins.csv";
    auto out = open_out(p);
    write_difficulty_csv(out, difficulty_bins(worlds, reference, policies, cfg.eval, cfg.seed));
    art.outputs["difficulty_bins"] = p;
  }
  {
    const fs::path p = art.run_dir / "length_bins.csv";
    auto out = open_out(p);
    out << "query,length,count,share,final_answers,accuracy\n";
    for (std::size_t q = 0; q < worlds.size(); ++q) {
      const LengthReport rep =
          length_accuracy_analysis(worlds[q], policies[q], cfg.eval.length_samples, cfg.seed);
      for (const LengthBin& b : rep.bins)
        out << worlds[q].seed() << ',' << b.length << ',' << b.count << ',' << b.share << ','
            << b.final_answers << ',' << b.accuracy << '\n';
    }
    art.outputs["length_bins"] = p;
  }
  {
    const fs::path p = art.run_dir / "drop_counts.csv";
    auto out = open_out(p);
    out << "query,threshold,fraction,all_drops,first_drops,pool,excluded\n";
    for (std::size_t q = 0; q < worlds.size(); ++q) {
      const DropReport rep =
          prefix_drop_analysis(worlds[q], policies[q], cfg.eval, cfg.eval.drop_pool_samples,
                               cfg.eval.drop_prefix_samples, cfg.seed);
      for (std::size_t ti = 0; ti < rep.thresholds.size(); ++ti)
        for (std::size_t fi = 0; fi < rep.fractions.size(); ++fi)
          out << worlds[q].seed() << ',' << rep.thresholds[ti] << ',' << rep.fractions[fi] << ','
              << rep.all_drops[ti][fi] << ',' << rep.first_drops[ti][fi] << ',' << rep.pool << ','
              << rep.excluded << '\n';
    }
    art.outputs["drop_counts"] = p;
  }

  write_manifest(art, "eval", cfg, ck.step, ck.step);
  return art;
}

RunArtifacts run_compare(const RunConfig& re2_cfg, const RunConfig& baseline_cfg,
                         const fs::path& out_base) {
  re2_cfg.validate();
  baseline_cfg.validate();
  if (!(re2_cfg.world == baseline_cfg.world) || re2_cfg.queries != baseline_cfg.queries)
    throw ConfigError("compare requires identical world sections in both configs");

  RunArtifacts art;
  art.run_dir = unique_run_dir(out_base, "compare", re2_cfg);

  const fs::path steps_path = art.run_dir / "compare_steps.csv";
  auto steps_csv = open_out(steps_path);
  steps_csv << "seed,step,tokens_a,accuracy_a,tokens_b,accuracy_b\n";
  art.outputs["compare_steps"] = steps_path;

  ordered_json per_seed = ordered_json::array();
  double delta_sum = 0.0;
  for (std::uint64_t s : re2_cfg.compare_seeds) {
    RunConfig cfg_a = re2_cfg;
    cfg_a.seed = s;
    cfg_a.world_seed_base = s;
    RunConfig cfg_b = baseline_cfg;
    cfg_b.seed = s;
    cfg_b.world_seed_base = s;
    if (cfg_b.train.mode == TrainMode::dapo_baseline)
      cfg_b.train = equalize_budget(cfg_a.train, cfg_b.train);

    std::vector<World> worlds_a = cfg_a.build_worlds();
    std::vector<World> worlds_b = cfg_b.build_worlds();
    Trainer a(worlds_a, cfg_a.train, cfg_a.seed);
    Trainer b(worlds_b, cfg_b.train, cfg_b.seed);

    const int steps = cfg_a.train.max_steps;
    for (int t = 1; t <= steps; ++t) {
      a.step();
      b.step();
      if (t % re2_cfg.compare_eval_every == 0 || t == steps) {
        steps_csv << s << ',' << t << ',' << a.cumulative_tokens() << ','
                  << exact_mean_pass1(a.worlds(), a.policies(), cfg_a.eval) << ','
                  << b.cumulative_tokens() << ','
                  << exact_mean_pass1(b.worlds(), b.policies(), cfg_b.eval) << '\n';
      }
    }
    const double acc_a = exact_mean_pass1(a.worlds(), a.policies(), cfg_a.eval);
    const double acc_b = exact_mean_pass1(b.worlds(), b.policies(), cfg_b.eval);
    const double ratio = a.cumulative_tokens() > 0
                             ? static_cast<double>(b.cumulative_tokens()) /
                                   static_cast<double>(a.cumulative_tokens())
                             : 0.0;
    delta_sum += acc_a - acc_b;
    per_seed.push_back({{"seed", s},
                        {"accuracy_a", acc_a},
                        {"accuracy_b", acc_b},
                        {"delta", acc_a - acc_b},
                        {"tokens_a", a.cumulative_tokens()},
                        {"tokens_b", b.cumulative_tokens()},
                        {"token_ratio", ratio}});
  }

  ordered_json summary;
  summary["mode_a"] = train_mode_name(re2_cfg.train.mode);
  summary["mode_b"] = train_mode_name(baseline_cfg.train.mode);
  summary["per_seed"] = per_seed;
  summary["mean_delta"] = delta_sum / static_cast<double>(re2_cfg.compare_seeds.size());
  const fs::path summary_path = art.run_dir / "compare_summary.json";
  open_out(summary_path) << summary.dump(2) << '\n';
  art.outputs["compare_summary"] = summary_path;

  write_manifest(art, "compare", re2_cfg, 0, re2_cfg.train.max_steps);
  return art;
}

RunArtifacts run_estlab(const RunConfig& cfg, const fs::path& out_base) {
  cfg.validate();
  RunArtifacts art;
  art.run_dir = unique_run_dir(out_base, "estlab", cfg);

  const std::vector<World> worlds = cfg.build_worlds();
  const fs::path sweep_path = art.run_dir / "estimator_sweep.csv";
  auto out = open_out(sweep_path);
  out << "query,setting,n,m,decay,mixed_prefixes,bias,variance,mse,truth,trials\n";
  ordered_json summary = ordered_json::array();
  for (const World& w : worlds) {
    const Policy policy = cfg.initial_policy(w);
    const auto reports = estimator_sweep(w, policy, cfg.estlab, cfg.seed);
    for (const EstimatorReport& r : reports)
      out << w.seed() << ',' << r.setting << ',' << r.n << ',' << r.m << ',' << r.decay << ','
          << (r.mixed_prefixes ? 1 : 0) << ',' << r.bias << ',' << r.variance << ',' << r.mse
          << ',' << r.truth << ',' << r.trials << '\n';
    const double mc_truth = ground_truth_accuracy(w, policy, cfg.estlab_truth_trials, cfg.seed);
    summary.push_back({{"world_seed", w.seed()},
                       {"ground_truth_mc", mc_truth},
                       {"ground_truth_exact", reports.front().truth}});
  }
  art.outputs["estimator_sweep"] = sweep_path;
  const fs::path summary_path = art.run_dir / "estlab_summary.json";
  open_out(summary_path) << summary.dump(2) << '\n';
  art.outputs["estlab_summary"] = summary_path;

  write_manifest(art, "estlab", cfg, 0, 0);
  return art;
}

RunArtifacts run_analyze(const RunConfig& cfg, const fs::path& out_base) {
  cfg.validate();
  RunArtifacts art;
  art.run_dir = unique_run_dir(out_base, "analyze", cfg);

  const std::vector<World> worlds = cfg.build_worlds();
  ordered_json summary = ordered_json::array();
  {
    const fs::path p = art.run_dir / "length_bins.csv";
    auto out = open_out(p);
    out << "query,length,count,share,final_answers,accuracy\n";
    for (const World& w : worlds) {
      const Policy policy = cfg.initial_policy(w);
      const LengthReport rep =
          length_accuracy_analysis(w, policy, cfg.eval.length_samples, cfg.seed);
      for (const LengthBin& b : rep.bins)
        out << w.seed() << ',' << b.length << ',' << b.count << ',' << b.share << ','
            << b.final_answers << ',' << b.accuracy << '\n';
      summary.push_back({{"world_seed", w.seed()},
                         {"rank_correlation", rep.rank_correlation},
                         {"correlation_defined", rep.correlation_defined},
                         {"final_answers", rep.final_answers}});
    }
    art.outputs["length_bins"] = p;
  }
  {
    const fs::path p = art.run_dir / "drop_counts.csv";
    auto out = open_out(p);
    out << "query,threshold,fraction,all_drops,first_drops,pool,excluded\n";
    for (const World& w : worlds) {
      const Policy policy = cfg.initial_policy(w);
      const DropReport rep = prefix_drop_analysis(w, policy, cfg.eval,
                                                  cfg.eval.drop_pool_samples,
                                                  cfg.eval.drop_prefix_samples, cfg.seed);
      for (std::size_t ti = 0; ti < rep.thresholds.size(); ++ti)
        for (std::size_t fi = 0; fi < rep.fractions.size(); ++fi)
          out << w.seed() << ',' << rep.thresholds[ti] << ',' << rep.fractions[fi] << ','
              << rep.all_drops[ti][fi] << ',' << rep.first_drops[ti][fi] << ',' << rep.pool << ','
              << rep.excluded << '\n';
    }
    art.outputs["drop_counts"] = p;
  }
  const fs::path summary_path = art.run_dir / "analyze_summary.json";
  open_out(summary_path) << summary.dump(2) << '\n';
  art.outputs["analyze_summary"] = summary_path;

  write_manifest(art, "analyze", cfg, 0, 0);
  return art;
}

}  // namespace re2
