#include "broute/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "broute/dataset.hpp"
#include "broute/errors.hpp"
#include "broute/rng.hpp"

namespace broute {

namespace {

using nlohmann::json;

json env_to_json(const EnvConfig& e) {
  return json{{"n_sessions", e.n_sessions},
              {"horizon", e.horizon},
              {"feature_dim", e.feature_dim},
              {"weak_quality_intercept", e.weak_quality.intercept},
              {"weak_quality_slope", e.weak_quality.slope},
              {"strong_quality_intercept", e.strong_quality.intercept},
              {"strong_quality_slope", e.strong_quality.slope},
              {"quality_noise_sd", e.quality_noise_sd},
              {"weak_cost_mean", e.weak_cost_mean},
              {"weak_cost_jitter", e.weak_cost_jitter},
              {"strong_cost_mean", e.strong_cost_mean},
              {"strong_cost_jitter", e.strong_cost_jitter},
              {"difficulty_drift", e.difficulty_drift},
              {"difficulty_escalation", e.difficulty_escalation},
              {"difficulty_noise_sd", e.difficulty_noise_sd},
              {"initial_difficulty_lo", e.initial_difficulty_lo},
              {"initial_difficulty_hi", e.initial_difficulty_hi},
              {"feature_noise_sd", e.feature_noise_sd},
              {"seed", e.seed}};
}

json relabel_to_json(const RunConfig& c) {
  return json{{"virtual_budgets", c.relabel.virtual_budgets},
              {"eta", c.relabel.eta},
              {"encoding", encoding_name(c.relabel.encoding)},
              {"split_ratios", c.split_ratios},
              {"split_seed", c.split_seed}};
}

json train_to_json(const RunConfig& c) {
  return json{
      {"seed", c.train_seed},
      {"cql",
       json{{"alpha", c.cql.alpha},
            {"gamma", c.cql.gamma},
            {"lr", c.cql.lr},
            {"batch_size", c.cql.batch_size},
            {"gradient_steps", c.cql.gradient_steps},
            {"target_sync_interval", c.cql.target_sync_interval},
            {"log_interval", c.cql.log_interval},
            {"hidden", c.cql.hidden}}},
      {"bc", json{{"lr", c.bc.lr},
                  {"batch_size", c.bc.batch_size},
                  {"gradient_steps", c.bc.gradient_steps},
                  {"log_interval", c.bc.log_interval},
                  {"hidden", c.bc.hidden}}}};
}

json eval_to_json(const RunConfig& c) {
  return json{{"budgets", c.eval.eval_budgets},
              {"lambda_grid", c.eval.lambda_grid},
              {"primary_budget", c.eval.primary_eval_budget},
              {"eta", c.eval.eta},
              {"gamma", c.eval.gamma},
              {"seeds", c.eval.seeds}};
}

json config_to_json(const RunConfig& c) {
  return json{{"env", env_to_json(c.env)},
              {"relabel", relabel_to_json(c)},
              {"train", train_to_json(c)},
              {"costs", json{{"weak", c.costs.weak_cost},
                             {"strong", c.costs.strong_cost}}},
              {"eval", eval_to_json(c)},
              {"ablation", json{{"no_hbr_budget", c.ablation.no_hbr_budget}}},
              {"paths", json{{"workdir", c.workdir.string()}}}};
}

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!known.count(key))
      throw ConfigError("unknown config key '" + key + "' in " + where);
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void env_from_json(const json& j, EnvConfig& e) {
  reject_unknown_keys(
      j,
      {"n_sessions", "horizon", "feature_dim", "weak_quality_intercept",
       "weak_quality_slope", "strong_quality_intercept", "strong_quality_slope",
       "quality_noise_sd", "weak_cost_mean", "weak_cost_jitter",
       "strong_cost_mean", "strong_cost_jitter", "difficulty_drift",
       "difficulty_escalation", "difficulty_noise_sd", "initial_difficulty_lo",
       "initial_difficulty_hi", "feature_noise_sd", "seed"},
      "env");
  get_if(j, "n_sessions", e.n_sessions);
  get_if(j, "horizon", e.horizon);
  get_if(j, "feature_dim", e.feature_dim);
  get_if(j, "weak_quality_intercept", e.weak_quality.intercept);
  get_if(j, "weak_quality_slope", e.weak_quality.slope);
  get_if(j, "strong_quality_intercept", e.strong_quality.intercept);
  get_if(j, "strong_quality_slope", e.strong_quality.slope);
  get_if(j, "quality_noise_sd", e.quality_noise_sd);
  get_if(j, "weak_cost_mean", e.weak_cost_mean);
  get_if(j, "weak_cost_jitter", e.weak_cost_jitter);
  get_if(j, "strong_cost_mean", e.strong_cost_mean);
  get_if(j, "strong_cost_jitter", e.strong_cost_jitter);
  get_if(j, "difficulty_drift", e.difficulty_drift);
  get_if(j, "difficulty_escalation", e.difficulty_escalation);
  get_if(j, "difficulty_noise_sd", e.difficulty_noise_sd);
  get_if(j, "initial_difficulty_lo", e.initial_difficulty_lo);
  get_if(j, "initial_difficulty_hi", e.initial_difficulty_hi);
  get_if(j, "feature_noise_sd", e.feature_noise_sd);
  get_if(j, "seed", e.seed);
}

void relabel_from_json(const json& j, RunConfig& c) {
  reject_unknown_keys(
      j, {"virtual_budgets", "eta", "encoding", "split_ratios", "split_seed"},
      "relabel");
  get_if(j, "virtual_budgets", c.relabel.virtual_budgets);
  get_if(j, "eta", c.relabel.eta);
  if (j.contains("encoding"))
    c.relabel.encoding = encoding_from_name(j.at("encoding").get<std::string>());
  if (j.contains("split_ratios")) {
    auto r = j.at("split_ratios").get<std::vector<double>>();
    if (r.size() != 3)
      throw ConfigError("relabel.split_ratios needs exactly 3 values");
    c.split_ratios = {r[0], r[1], r[2]};
  }
  get_if(j, "split_seed", c.split_seed);
}

void train_from_json(const json& j, RunConfig& c) {
  reject_unknown_keys(j, {"seed", "cql", "bc"}, "train");
  get_if(j, "seed", c.train_seed);
  if (j.contains("cql")) {
    const json& q = j.at("cql");
    reject_unknown_keys(q,
                        {"alpha", "gamma", "lr", "batch_size", "gradient_steps",
                         "target_sync_interval", "log_interval", "hidden"},
                        "train.cql");
    get_if(q, "alpha", c.cql.alpha);
    get_if(q, "gamma", c.cql.gamma);
    get_if(q, "lr", c.cql.lr);
    get_if(q, "batch_size", c.cql.batch_size);
    get_if(q, "gradient_steps", c.cql.gradient_steps);
    get_if(q, "target_sync_interval", c.cql.target_sync_interval);
    get_if(q, "log_interval", c.cql.log_interval);
    get_if(q, "hidden", c.cql.hidden);
  }
  if (j.contains("bc")) {
    const json& b = j.at("bc");
    reject_unknown_keys(
        b, {"lr", "batch_size", "gradient_steps", "log_interval", "hidden"},
        "train.bc");
    get_if(b, "lr", c.bc.lr);
    get_if(b, "batch_size", c.bc.batch_size);
    get_if(b, "gradient_steps", c.bc.gradient_steps);
    get_if(b, "log_interval", c.bc.log_interval);
    get_if(b, "hidden", c.bc.hidden);
  }
  c.cql.seed = c.train_seed;
  c.bc.seed = c.train_seed;
}

void eval_from_json(const json& j, RunConfig& c) {
  reject_unknown_keys(
      j, {"budgets", "lambda_grid", "primary_budget", "eta", "gamma", "seeds"},
      "eval");
  get_if(j, "budgets", c.eval.eval_budgets);
  get_if(j, "lambda_grid", c.eval.lambda_grid);
  get_if(j, "primary_budget", c.eval.primary_eval_budget);
  get_if(j, "eta", c.eval.eta);
  get_if(j, "gamma", c.eval.gamma);
  get_if(j, "seeds", c.eval.seeds);
}

void validate(const RunConfig& c) {
  if (c.env.horizon < 1) throw ConfigError("env.horizon must be >= 1");
  if (c.env.feature_dim < 1) throw ConfigError("env.feature_dim must be >= 1");
  if (c.env.n_sessions < 1) throw ConfigError("env.n_sessions must be >= 1");
  if (!(c.env.weak_cost_mean > 0.0) || !(c.env.strong_cost_mean > 0.0))
    throw ConfigError("env cost means must be positive");
  // linear curves: checking both endpoints covers all difficulties
  for (double d : {0.0, 1.0}) {
    const double weak = c.env.weak_quality.intercept + c.env.weak_quality.slope * d;
    const double strong =
        c.env.strong_quality.intercept + c.env.strong_quality.slope * d;
    if (strong < weak)
      throw ConfigError("strong quality curve must dominate weak on [0,1]");
  }
  if (c.relabel.virtual_budgets.empty())
    throw ConfigError("relabel.virtual_budgets must be non-empty");
  std::set<double> unique_budgets;
  for (double b : c.relabel.virtual_budgets) {
    if (!(b > 0.0)) throw ConfigError("virtual budgets must be positive");
    if (!unique_budgets.insert(b).second)
      throw ConfigError("virtual budgets must be distinct");
  }
  if (c.relabel.eta < 0.0) throw ConfigError("relabel.eta must be >= 0");
  const double ratio_sum = c.split_ratios[0] + c.split_ratios[1] + c.split_ratios[2];
  if (std::abs(ratio_sum - 1.0) > 1e-9)
    throw ConfigError("relabel.split_ratios must sum to 1");
  if (c.cql.alpha < 0.0) throw ConfigError("train.cql.alpha must be >= 0");
  if (!(c.cql.gamma >= 0.0 && c.cql.gamma <= 1.0))
    throw ConfigError("train.cql.gamma must be in [0,1]");
  if (c.cql.batch_size < 1 || c.bc.batch_size < 1)
    throw ConfigError("batch sizes must be positive");
  if (c.cql.gradient_steps < 0 || c.bc.gradient_steps < 0)
    throw ConfigError("gradient step counts must be >= 0");
  if (c.cql.target_sync_interval < 1)
    throw ConfigError("train.cql.target_sync_interval must be >= 1");
  if (!(c.costs.weak_cost > 0.0) || !(c.costs.strong_cost > c.costs.weak_cost))
    throw ConfigError("costs must be positive with strong > weak");
  for (double b : c.eval.eval_budgets)
    if (!(b > 0.0)) throw ConfigError("eval.budgets must be positive");
  for (std::size_t i = 1; i < c.eval.lambda_grid.size(); ++i)
    if (c.eval.lambda_grid[i] < c.eval.lambda_grid[i - 1])
      throw ConfigError("eval.lambda_grid must be sorted ascending");
  for (double l : c.eval.lambda_grid)
    if (l < 0.0) throw ConfigError("eval.lambda_grid values must be >= 0");
}

void config_from_json(const json& j, RunConfig& c) {
  reject_unknown_keys(
      j, {"env", "relabel", "train", "costs", "eval", "ablation", "paths"},
      "config root");
  if (j.contains("env")) env_from_json(j.at("env"), c.env);
  if (j.contains("relabel")) relabel_from_json(j.at("relabel"), c);
  if (j.contains("train")) train_from_json(j.at("train"), c);
  if (j.contains("costs")) {
    const json& k = j.at("costs");
    reject_unknown_keys(k, {"weak", "strong"}, "costs");
    get_if(k, "weak", c.costs.weak_cost);
    get_if(k, "strong", c.costs.strong_cost);
  }
  if (j.contains("eval")) eval_from_json(j.at("eval"), c);
  if (j.contains("ablation")) {
    const json& a = j.at("ablation");
    reject_unknown_keys(a, {"no_hbr_budget"}, "ablation");
    get_if(a, "no_hbr_budget", c.ablation.no_hbr_budget);
  }
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    reject_unknown_keys(p, {"workdir"}, "paths");
    if (p.contains("workdir"))
      c.workdir = p.at("workdir").get<std::string>();
  }
  validate(c);
}

}  // namespace

std::string RunConfig::to_json() const { return config_to_json(*this).dump(2); }

std::string RunConfig::digest() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(to_json())));
  return buf;
}

RunConfig default_config() { return RunConfig{}; }

RunConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  try {
    config_from_json(j, c);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json_text(buffer.str());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like section.key=value: " +
                      assignment);
  const std::string dotted = assignment.substr(0, eq);
  const std::string value_text = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::exception&) {
    value = value_text;  // bare strings are allowed unquoted
  }

  json root = json::parse(cfg.to_json());
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("bad override path: " + dotted);
    if (dot == std::string::npos) {
      if (!node->contains(key))
        throw ConfigError("unknown config key in override: " + dotted);
      (*node)[key] = value;
      break;
    }
    if (!node->contains(key))
      throw ConfigError("unknown config section in override: " + dotted);
    node = &(*node)[key];
    start = dot + 1;
  }
  RunConfig fresh;
  try {
    config_from_json(root, fresh);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad override value: ") + e.what());
  }
  cfg = fresh;
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) {
  atomic_write_text(path, cfg.to_json() + "\n");
}

}  // namespace broute
