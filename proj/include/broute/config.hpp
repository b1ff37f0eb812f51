#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "broute/env.hpp"
#include "broute/eval.hpp"
#include "broute/mdp.hpp"
#include "broute/relabel.hpp"
#include "broute/train.hpp"

namespace broute {

// The whole pipeline's knobs in one place. Serialized as JSON; every output
// artifact records the digest of the effective config.
struct RunConfig {
  EnvConfig env;
  RelabelConfig relabel;
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
  std::uint64_t split_seed = 7;
  std::uint64_t train_seed = 3;
  CqlConfig cql;
  BcConfig bc;
  CostModel costs;
  EvalConfig eval;
  AblationConfig ablation;
  std::filesystem::path workdir = "runs/default";

  // Canonical JSON of the effective config (sorted keys).
  std::string to_json() const;
  std::string digest() const;

  // File layout inside workdir.
  std::filesystem::path raw_corpus_path() const { return workdir / "raw_corpus.jsonl"; }
  std::filesystem::path raw_manifest_path() const { return workdir / "raw_manifest.json"; }
  std::filesystem::path dataset_path(const std::string& tag = "") const {
    return workdir / (tag.empty() ? "dataset.tsv" : "dataset-" + tag + ".tsv");
  }
  std::filesystem::path dataset_manifest_path(const std::string& tag = "") const {
    return workdir / (tag.empty() ? "dataset_manifest.json"
                                  : "dataset_manifest-" + tag + ".json");
  }
  std::filesystem::path splits_path() const { return workdir / "splits.tsv"; }
  std::filesystem::path stats_path(const std::string& tag = "") const {
    return workdir / (tag.empty() ? "stats.txt" : "stats-" + tag + ".txt");
  }
  std::filesystem::path checkpoint_path(const std::string& name) const {
    return workdir / (name + ".ckpt");
  }
  std::filesystem::path trainlog_path(const std::string& name) const {
    return workdir / (name + "_trainlog.csv");
  }
  std::filesystem::path report_path(const std::string& name) const {
    return workdir / (name + "_report.csv");
  }
};

RunConfig default_config();

// Loads JSON, overlaying onto defaults. Unknown keys are a ConfigError.
RunConfig load_config(const std::filesystem::path& path);
RunConfig config_from_json_text(const std::string& text);

// Applies a dotted-path override, e.g. "env.seed=2" or
// "relabel.virtual_budgets=[500,3000]". Values parse as JSON.
void apply_override(RunConfig& cfg, const std::string& assignment);

void save_config(const std::filesystem::path& path, const RunConfig& cfg);

}  // namespace broute
