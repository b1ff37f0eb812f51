#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "broute/env.hpp"
#include "broute/mdp.hpp"

namespace broute {

// Virtual-budget replay settings. Each raw trajectory is cloned once per
// budget; clones truncate where the replayed budget runs out.
struct RelabelConfig {
  std::vector<double> virtual_budgets{500, 1500, 3000, 5000, 8000};
  double eta = 5.0;
  BudgetEncoding encoding = BudgetEncoding::Linear;
};

struct RelabeledEpisode {
  Episode episode;
  std::uint64_t session_id = 0;
  std::string path_id;
  double virtual_budget = 0.0;
};

enum class Split { Train, Val, FinalTest };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct SplitAssignment {
  std::map<std::uint64_t, Split> by_session;

  Split at(std::uint64_t session_id) const;
  std::vector<std::uint64_t> sessions_in(Split s) const;
};

// Replays one trajectory under initial budget B0: decrement the budget by
// each realized cost, stop at the first bankrupt step (keeping it, with the
// penalty applied), and encode the pre-action budget into each observation.
RelabeledEpisode relabel_trajectory(const RawTrajectory& raw, double B0,
                                    double eta, double total_for_normalization,
                                    BudgetEncoding encoding);

// Union over (raw x virtual budget), raw order outer, budgets ascending.
std::vector<RelabeledEpisode> expand_dataset(
    const std::vector<RawTrajectory>& raws, const RelabelConfig& cfg);

// Deterministic hash split, independent of input order.
SplitAssignment split_sessions(const std::vector<std::uint64_t>& session_ids,
                               const std::array<double, 3>& ratios,
                               std::uint64_t split_seed);

struct TierStats {
  double virtual_budget = 0.0;
  std::size_t episodes = 0;
  std::size_t transitions = 0;
  std::size_t bankrupt_episodes = 0;

  double bankruptcy_rate() const {
    return episodes == 0 ? 0.0
                         : static_cast<double>(bankrupt_episodes) / episodes;
  }
};

struct DatasetStats {
  std::size_t episodes = 0;
  std::size_t transitions = 0;
  std::size_t bankrupt_episodes = 0;
  std::array<std::size_t, 2> action_counts{};  // [weak, strong]
  std::vector<TierStats> tiers;                // ascending by budget

  double bankruptcy_rate() const {
    return episodes == 0 ? 0.0
                         : static_cast<double>(bankrupt_episodes) / episodes;
  }
};

DatasetStats dataset_stats(const std::vector<RelabeledEpisode>& episodes);

std::string format_stats(const DatasetStats& stats);

}  // namespace broute
