#include "re2/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace re2 {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* key : allowed) ok = ok || it.key() == key;
    if (!ok)
      throw ConfigError("unknown key '" + it.key() + "' in " + section);
  }
}

const json& require_field(const json& obj, const std::string& section, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ConfigError("missing required field '" + std::string(key) + "' in " + section);
  return *it;
}

template <typename T>
void read_opt(const json& obj, const char* key, T& into) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    into = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse failure: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  check_keys(j, "config", {"seed", "out", "world", "train", "eval", "estlab", "compare"});

  RunConfig cfg;
  cfg.seed = require_field(j, "config", "seed").get<std::uint64_t>();
  cfg.world_seed_base = cfg.seed;
  read_opt(j, "out", cfg.out);

  const json& jw = require_field(j, "config", "world");
  check_keys(jw, "world",
             {"queries", "seed_base", "branch_count", "trap_fraction", "corridor_len_good",
              "corridor_len_trap", "vocab_size", "answers_max"});
  read_opt(jw, "queries", cfg.queries);
  cfg.world_seed_base_explicit = jw.contains("seed_base");
  read_opt(jw, "seed_base", cfg.world_seed_base);
  read_opt(jw, "branch_count", cfg.world.branch_count);
  read_opt(jw, "trap_fraction", cfg.world.trap_fraction);
  read_opt(jw, "corridor_len_good", cfg.world.corridor_len_good);
  read_opt(jw, "corridor_len_trap", cfg.world.corridor_len_trap);
  read_opt(jw, "vocab_size", cfg.world.vocab_size);
  read_opt(jw, "answers_max", cfg.world.answers_max);

  const json& jt = require_field(j, "config", "train");
  check_keys(jt, "train",
             {"mode", "learning_rate", "batch_queries", "n", "m", "R", "eps_low", "eps_high",
              "mu", "max_steps", "baseline_batch_queries", "baseline_samples",
              "baseline_mask_resolve", "resolve_logit_init", "checkpoint_every"});
  cfg.train.mode = train_mode_from_name(require_field(jt, "train", "mode").get<std::string>());
  cfg.train.max_steps = require_field(jt, "train", "max_steps").get<int>();
  if (cfg.train.mode == TrainMode::re2) {
    cfg.train.n = require_field(jt, "train", "n").get<int>();
    cfg.train.m = require_field(jt, "train", "m").get<int>();
  } else {
    read_opt(jt, "n", cfg.train.n);
    read_opt(jt, "m", cfg.train.m);
  }
  read_opt(jt, "learning_rate", cfg.train.learning_rate);
  read_opt(jt, "batch_queries", cfg.train.batch_queries);
  read_opt(jt, "R", cfg.train.R);
  read_opt(jt, "eps_low", cfg.train.eps_low);
  read_opt(jt, "eps_high", cfg.train.eps_high);
  read_opt(jt, "mu", cfg.train.mu);
  read_opt(jt, "baseline_batch_queries", cfg.train.baseline_batch_queries);
  read_opt(jt, "baseline_samples", cfg.train.baseline_samples);
  read_opt(jt, "baseline_mask_resolve", cfg.train.baseline_mask_resolve);
  read_opt(jt, "resolve_logit_init", cfg.train.resolve_logit_init);
  read_opt(jt, "checkpoint_every", cfg.train.checkpoint_every);

  if (auto it = j.find("eval"); it != j.end()) {
    const json& je = *it;
    check_keys(je, "eval",
               {"eval_temperature", "restart_cap", "samples_per_query", "difficulty_bins",
                "drop_threshold_low", "drop_threshold_high", "truncation_fractions",
                "fallback_forced_answer", "reference_samples", "scaling_ks", "length_samples",
                "drop_pool_samples", "drop_prefix_samples"});
    read_opt(je, "eval_temperature", cfg.eval.eval_temperature);
    read_opt(je, "restart_cap", cfg.eval.restart_cap);
    read_opt(je, "samples_per_query", cfg.eval.samples_per_query);
    read_opt(je, "difficulty_bins", cfg.eval.difficulty_bins);
    read_opt(je, "drop_threshold_low", cfg.eval.drop_threshold_low);
    read_opt(je, "drop_threshold_high", cfg.eval.drop_threshold_high);
    read_opt(je, "truncation_fractions", cfg.eval.truncation_fractions);
    read_opt(je, "fallback_forced_answer", cfg.eval.fallback_forced_answer);
    read_opt(je, "reference_samples", cfg.eval.reference_samples);
    read_opt(je, "scaling_ks", cfg.eval.scaling_ks);
    read_opt(je, "length_samples", cfg.eval.length_samples);
    read_opt(je, "drop_pool_samples", cfg.eval.drop_pool_samples);
    read_opt(je, "drop_prefix_samples", cfg.eval.drop_prefix_samples);
  }

  if (auto it = j.find("estlab"); it != j.end()) {
    const json& js = *it;
    check_keys(js, "estlab",
               {"n_values", "m_values", "fixed_n", "fixed_m", "repeats", "ema_decay",
                "include_mixed_prefixes", "truth_trials"});
    read_opt(js, "n_values", cfg.estlab.n_values);
    read_opt(js, "m_values", cfg.estlab.m_values);
    read_opt(js, "fixed_n", cfg.estlab.fixed_n);
    read_opt(js, "fixed_m", cfg.estlab.fixed_m);
    read_opt(js, "repeats", cfg.estlab.repeats);
    read_opt(js, "ema_decay", cfg.estlab.ema_decay);
    read_opt(js, "include_mixed_prefixes", cfg.estlab.include_mixed_prefixes);
    read_opt(js, "truth_trials", cfg.estlab_truth_trials);
  }

  if (auto it = j.find("compare"); it != j.end()) {
    const json& jc = *it;
    check_keys(jc, "compare", {"seeds", "eval_every"});
    read_opt(jc, "seeds", cfg.compare_seeds);
    read_opt(jc, "eval_every", cfg.compare_eval_every);
  }

  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

void RunConfig::validate() const {
  if (queries < 1) throw ConfigError("world.queries must be >= 1");
  train.validate();
  eval.validate();
  estlab.validate();
  if (estlab_truth_trials < 1) throw ConfigError("estlab.truth_trials must be >= 1");
  if (compare_seeds.empty()) throw ConfigError("compare.seeds must not be empty");
  if (compare_eval_every < 1) throw ConfigError("compare.eval_every must be >= 1");
  // Surface world parameter problems at config time rather than mid-run.
  generate_world(world_seed_base, world);
}

std::string RunConfig::canonical_json() const {
  json j;
  j["seed"] = seed;
  j["out"] = out;
  j["world"] = {{"queries", queries},
                {"seed_base", world_seed_base},
                {"branch_count", world.branch_count},
                {"trap_fraction", world.trap_fraction},
                {"corridor_len_good", world.corridor_len_good},
                {"corridor_len_trap", world.corridor_len_trap},
                {"vocab_size", world.vocab_size},
                {"answers_max", world.answers_max}};
  j["train"] = {{"mode", train_mode_name(train.mode)},
                {"learning_rate", train.learning_rate},
                {"batch_queries", train.batch_queries},
                {"n", train.n},
                {"m", train.m},
                {"R", train.R},
                {"eps_low", train.eps_low},
                {"eps_high", train.eps_high},
                {"mu", train.mu},
                {"max_steps", train.max_steps},
                {"baseline_batch_queries", train.baseline_batch_queries},
                {"baseline_samples", train.baseline_samples},
                {"baseline_mask_resolve", train.baseline_mask_resolve},
                {"resolve_logit_init", train.resolve_logit_init},
                {"checkpoint_every", train.checkpoint_every}};
  j["eval"] = {{"eval_temperature", eval.eval_temperature},
               {"restart_cap", eval.restart_cap},
               {"samples_per_query", eval.samples_per_query},
               {"difficulty_bins", eval.difficulty_bins},
               {"drop_threshold_low", eval.drop_threshold_low},
               {"drop_threshold_high", eval.drop_threshold_high},
               {"truncation_fractions", eval.truncation_fractions},
               {"fallback_forced_answer", eval.fallback_forced_answer},
               {"reference_samples", eval.reference_samples},
               {"scaling_ks", eval.scaling_ks},
               {"length_samples", eval.length_samples},
               {"drop_pool_samples", eval.drop_pool_samples},
               {"drop_prefix_samples", eval.drop_prefix_samples}};
  j["estlab"] = {{"n_values", estlab.n_values},
                 {"m_values", estlab.m_values},
                 {"fixed_n", estlab.fixed_n},
                 {"fixed_m", estlab.fixed_m},
                 {"repeats", estlab.repeats},
                 {"ema_decay", estlab.ema_decay},
                 {"include_mixed_prefixes", estlab.include_mixed_prefixes},
                 {"truth_trials", estlab_truth_trials}};
  j["compare"] = {{"seeds", compare_seeds}, {"eval_every", compare_eval_every}};
  return j.dump(2);
}

std::uint64_t RunConfig::config_hash() const {
  const std::string s = canonical_json();
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<World> RunConfig::build_worlds() const {
  std::vector<World> out;
  out.reserve(static_cast<std::size_t>(queries));
  for (int q = 0; q < queries; ++q)
    out.push_back(generate_world(world_seed_base + static_cast<std::uint64_t>(q), world));
  return out;
}

Policy RunConfig::initial_policy(const World& w) const {
  Policy p(w, 1.0);
  p.set_resolve_logits(train.resolve_logit_init);
  return p;
}

}  // namespace re2
