#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "broute/env.hpp"
#include "broute/relabel.hpp"
#include "broute/train.hpp"

namespace broute {

// Flat transition row as persisted: one line per transition, tab-separated,
// observation vectors comma-joined. Field order is part of the format.
struct TransitionRecord {
  std::string episode_id;
  std::uint64_t raw_session_id = 0;
  std::string path_id;
  double virtual_budget = 0.0;
  int turn = 0;
  std::vector<double> obs;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool terminal = false;
  bool bankrupt = false;
};

struct DatasetManifest {
  std::size_t n_episodes = 0;
  std::size_t n_transitions = 0;
  std::string config_digest;
  std::uint64_t split_seed = 0;
  std::string encoding = "linear";
  int feature_dim = 0;
  std::vector<double> virtual_budgets;
  double eta = 5.0;
};

struct RawCorpusManifest {
  std::size_t n_sessions = 0;
  std::size_t n_trajectories = 0;
  std::size_t n_turn_records = 0;
  int horizon = 0;
  int feature_dim = 0;
  std::string config_digest;
  std::uint64_t env_seed = 0;
};

// Raw rollout paths: one JSON object per line.
void write_raw_corpus(const std::filesystem::path& path,
                      const std::vector<RawTrajectory>& raws);
std::vector<RawTrajectory> read_raw_corpus(const std::filesystem::path& path);

void write_raw_manifest(const std::filesystem::path& path,
                        const RawCorpusManifest& manifest);
RawCorpusManifest read_raw_manifest(const std::filesystem::path& path);

std::vector<TransitionRecord> episodes_to_records(
    const std::vector<RelabeledEpisode>& episodes);

void write_transitions(const std::filesystem::path& path,
                       const std::vector<TransitionRecord>& records);
std::vector<TransitionRecord> read_transitions(
    const std::filesystem::path& path);
// Streaming variant for large files.
void for_each_transition(const std::filesystem::path& path,
                         const std::function<void(TransitionRecord&&)>& fn);

void write_dataset_manifest(const std::filesystem::path& path,
                            const DatasetManifest& manifest);
DatasetManifest read_dataset_manifest(const std::filesystem::path& path);

void write_splits(const std::filesystem::path& path,
                  const SplitAssignment& splits);
SplitAssignment read_splits(const std::filesystem::path& path);

// Filter + pack records for training. Sessions not in `splits` are an error.
TransitionArrays records_to_arrays(const std::vector<TransitionRecord>& records,
                                   const SplitAssignment& splits, Split split);

void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content);

}  // namespace broute
