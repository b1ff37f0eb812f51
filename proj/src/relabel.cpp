#include "broute/relabel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "broute/rng.hpp"

namespace broute {

std::string split_name(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::FinalTest:
      return "final-test";
  }
  throw std::invalid_argument("unknown split");
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "final-test") return Split::FinalTest;
  throw std::invalid_argument("unknown split: " + name);
}

Split SplitAssignment::at(std::uint64_t session_id) const {
  auto it = by_session.find(session_id);
  if (it == by_session.end())
    throw std::invalid_argument("session not in split assignment: " +
                                std::to_string(session_id));
  return it->second;
}

std::vector<std::uint64_t> SplitAssignment::sessions_in(Split s) const {
  std::vector<std::uint64_t> out;
  for (const auto& [id, split] : by_session)
    if (split == s) out.push_back(id);
  return out;
}

RelabeledEpisode relabel_trajectory(const RawTrajectory& raw, double B0,
                                    double eta, double total_for_normalization,
                                    BudgetEncoding encoding) {
  if (!(B0 > 0.0)) throw std::invalid_argument("relabel: B0 must be positive");
  if (raw.turns.empty())
    throw std::invalid_argument("relabel: empty trajectory");

  RelabeledEpisode out;
  out.session_id = raw.session_id;
  out.path_id = raw.path_id;
  out.virtual_budget = B0;
  out.episode.initial_budget = B0;

  BudgetState budget{1.0, total_for_normalization};
  const Eigen::Index dim = raw.turns.front().features.size();
  const Eigen::VectorXd absorbing = Eigen::VectorXd::Zero(dim);

  for (std::size_t i = 0; i < raw.turns.size(); ++i) {
    const RawTurn& turn = raw.turns[i];
    BudgetState next_budget = update_budget(budget, turn.cost);
    const bool bankrupt = is_bankrupt(next_budget);
    const bool last_raw_turn = i + 1 == raw.turns.size();

    Transition tr;
    tr.obs = encode_observation(turn.features, budget.remaining, encoding);
    tr.action = turn.action;
    tr.reward = step_reward(turn.quality, bankrupt, eta);
    const Eigen::VectorXd& next_features =
        last_raw_turn ? absorbing : raw.turns[i + 1].features;
    tr.next_obs =
        encode_observation(next_features, next_budget.remaining, encoding);
    tr.terminal = bankrupt || last_raw_turn;
    tr.bankrupt = bankrupt;
    tr.turn = static_cast<int>(i) + 1;
    tr.virtual_budget = B0;
    tr.raw_session_id = raw.session_id;
    out.episode.transitions.push_back(std::move(tr));

    if (bankrupt) break;  // drop all subsequent turns
    budget = next_budget;
  }
  return out;
}

std::vector<RelabeledEpisode> expand_dataset(
    const std::vector<RawTrajectory>& raws, const RelabelConfig& cfg) {
  if (raws.empty()) throw std::invalid_argument("expand_dataset: no input");
  std::vector<double> budgets = cfg.virtual_budgets;
  std::sort(budgets.begin(), budgets.end());
  std::vector<RelabeledEpisode> out;
  out.reserve(raws.size() * budgets.size());
  for (const RawTrajectory& raw : raws)
    for (double b0 : budgets)
      out.push_back(relabel_trajectory(raw, b0, cfg.eta, b0, cfg.encoding));
  return out;
}

SplitAssignment split_sessions(const std::vector<std::uint64_t>& session_ids,
                               const std::array<double, 3>& ratios,
                               std::uint64_t split_seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split_sessions: ratios must sum to 1");
  SplitAssignment out;
  for (std::uint64_t id : session_ids) {
    if (out.by_session.count(id))
      throw std::invalid_argument("split_sessions: duplicate session id " +
                                  std::to_string(id));
    double u = u64_to_unit(mix64(hash_combine(split_seed, id)));
    Split s = u < ratios[0]               ? Split::Train
              : u < ratios[0] + ratios[1] ? Split::Val
                                          : Split::FinalTest;
    out.by_session.emplace(id, s);
  }
  return out;
}

DatasetStats dataset_stats(const std::vector<RelabeledEpisode>& episodes) {
  DatasetStats stats;
  std::map<double, TierStats> tiers;
  for (const RelabeledEpisode& ep : episodes) {
    TierStats& tier = tiers[ep.virtual_budget];
    tier.virtual_budget = ep.virtual_budget;
    tier.episodes += 1;
    tier.transitions += ep.episode.transitions.size();
    stats.episodes += 1;
    stats.transitions += ep.episode.transitions.size();
    bool bankrupt = !ep.episode.transitions.empty() &&
                    ep.episode.transitions.back().bankrupt;
    if (bankrupt) {
      tier.bankrupt_episodes += 1;
      stats.bankrupt_episodes += 1;
    }
    for (const Transition& tr : ep.episode.transitions)
      stats.action_counts[action_index(tr.action)] += 1;
  }
  for (auto& [_, tier] : tiers) stats.tiers.push_back(tier);
  return stats;
}

std::string format_stats(const DatasetStats& stats) {
  std::ostringstream os;
  os << "episodes: " << stats.episodes << "\n"
     << "transitions: " << stats.transitions << "\n"
     << "bankruptcy_rate: " << stats.bankruptcy_rate() << "\n"
     << "actions_weak: " << stats.action_counts[0] << "\n"
     << "actions_strong: " << stats.action_counts[1] << "\n";
  for (const TierStats& tier : stats.tiers)
    os << "tier " << tier.virtual_budget << ": episodes=" << tier.episodes
       << " transitions=" << tier.transitions
       << " bankruptcy_rate=" << tier.bankruptcy_rate() << "\n";
  return os.str();
}

}  // namespace broute
