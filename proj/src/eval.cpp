#include "broute/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "broute/errors.hpp"

namespace broute {

namespace {

constexpr std::uint64_t kEpisodeStreamTag = 0x65766170;

int tree_horizon(const RolloutTree& tree) {
  int h = 0;
  for (const TurnNode* n = tree.root.get(); n != nullptr;
       n = n->children[0].get())
    h += 1;
  return h;
}

}  // namespace

EpisodeResult replay_policy_on_tree(const RolloutTree& tree,
                                    const PolicySpec& policy, double B0,
                                    const CostModel& costs, double eta,
                                    double gamma) {
  if (!tree.root) throw std::invalid_argument("replay: empty tree");
  EpisodeResult result;
  BudgetState budget{1.0, B0};
  Rng episode_rng(hash_combine(hash_combine(policy.seed, tree.session_id),
                               kEpisodeStreamTag));

  const TurnNode* node = tree.root.get();
  int horizon_left = tree_horizon(tree);
  double discount = 1.0;

  while (node != nullptr) {
    Observation obs =
        encode_observation(node->features, budget.remaining, policy.encoding);
    const Action action = select_action(policy, obs, budget.remaining * B0,
                                        horizon_left, costs, episode_rng);
    const int a = action_index(action);

    result.budget_trace.push_back(budget.remaining);
    result.action_trace.push_back(a);
    result.decisions += 1;
    result.strong_decisions += a;
    result.total_cost += node->cost[a];

    BudgetState next_budget = update_budget(budget, node->cost[a]);
    const bool bankrupt = is_bankrupt(next_budget);
    result.ret += discount * step_reward(node->quality[a], bankrupt, eta);
    discount *= gamma;
    budget = next_budget;
    if (bankrupt) {
      result.bankrupt = true;
      break;
    }
    node = node->children[a].get();
    horizon_left -= 1;
  }
  result.final_remaining = budget.remaining;
  return result;
}

EvalReport evaluate(const PolicySpec& policy,
                    const std::vector<RolloutTree>& trees, double B0,
                    const CostModel& costs, const EvalConfig& cfg) {
  if (trees.empty()) throw std::invalid_argument("evaluate: no trees");
  EvalReport report;
  report.policy = policy.id;
  report.budget = B0;
  report.lambda = policy.kind == PolicyKind::QLambda ? policy.lambda : 0.0;
  report.n_episodes = trees.size();

  double cost_sum = 0.0;
  double return_sum = 0.0;
  std::size_t bankrupt_count = 0;
  std::size_t strong = 0;
  std::size_t decisions = 0;
  for (const RolloutTree& tree : trees) {
    EpisodeResult ep =
        replay_policy_on_tree(tree, policy, B0, costs, cfg.eta, cfg.gamma);
    cost_sum += ep.total_cost;
    return_sum += ep.ret;
    bankrupt_count += ep.bankrupt ? 1 : 0;
    strong += static_cast<std::size_t>(ep.strong_decisions);
    decisions += static_cast<std::size_t>(ep.decisions);
  }
  const double n = static_cast<double>(trees.size());
  report.avg_cost = cost_sum / n;
  report.avg_return = return_sum / n;
  report.bankruptcy_rate = static_cast<double>(bankrupt_count) / n;
  report.strong_usage_pct =
      decisions == 0
          ? 0.0
          : 100.0 * static_cast<double>(strong) / static_cast<double>(decisions);
  return report;
}

std::vector<EvalReport> lambda_sweep(std::shared_ptr<const MlpParams> ckpt,
                                     BudgetEncoding encoding,
                                     const std::vector<RolloutTree>& trees,
                                     double B0, const CostModel& costs,
                                     const EvalConfig& cfg,
                                     const std::string& id_prefix) {
  if (cfg.lambda_grid.empty())
    throw std::invalid_argument("lambda_sweep: empty grid");
  std::vector<EvalReport> reports;
  for (double lambda : cfg.lambda_grid) {
    PolicySpec policy = make_q_lambda(
        ckpt, encoding, lambda, id_prefix + ":" + std::to_string(lambda));
    reports.push_back(evaluate(policy, trees, B0, costs, cfg));
  }
  return reports;
}

SensitivityReport budget_sensitivity(const PolicySpec& policy,
                                     const std::vector<RolloutTree>& trees,
                                     const std::vector<double>& budgets,
                                     const CostModel& costs,
                                     const EvalConfig& cfg, int bins) {
  if (bins < 2) throw std::invalid_argument("budget_sensitivity: bins < 2");
  std::vector<double> bin_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<std::size_t> bin_count(static_cast<std::size_t>(bins), 0);

  double sum_x = 0.0, sum_y = 0.0, sum_xx = 0.0, sum_xy = 0.0;
  std::size_t n = 0;
  for (double B0 : budgets) {
    for (const RolloutTree& tree : trees) {
      EpisodeResult ep =
          replay_policy_on_tree(tree, policy, B0, costs, cfg.eta, cfg.gamma);
      for (int t = 0; t < ep.decisions; ++t) {
        const double x =
            std::clamp(ep.budget_trace[static_cast<std::size_t>(t)], 0.0, 1.0);
        const double y = ep.action_trace[static_cast<std::size_t>(t)];
        int bin = static_cast<int>(std::floor(x * bins));
        if (bin >= bins) bin = bins - 1;
        bin_sum[static_cast<std::size_t>(bin)] += y;
        bin_count[static_cast<std::size_t>(bin)] += 1;
        sum_x += x;
        sum_y += y;
        sum_xx += x * x;
        sum_xy += x * y;
        n += 1;
      }
    }
  }

  SensitivityReport report;
  report.bin_count = bin_count;
  report.bin_probability.resize(static_cast<std::size_t>(bins));
  std::size_t occupied = 0;
  for (int b = 0; b < bins; ++b) {
    const std::size_t c = bin_count[static_cast<std::size_t>(b)];
    occupied += c > 0 ? 1 : 0;
    report.bin_probability[static_cast<std::size_t>(b)] =
        c > 0 ? bin_sum[static_cast<std::size_t>(b)] / static_cast<double>(c)
              : std::numeric_limits<double>::quiet_NaN();
  }
  const double dn = static_cast<double>(n);
  const double var_x = n > 0 ? sum_xx / dn - (sum_x / dn) * (sum_x / dn) : 0.0;
  if (occupied >= 2 && var_x > 1e-12) {
    const double cov_xy = sum_xy / dn - (sum_x / dn) * (sum_y / dn);
    report.slope = cov_xy / var_x;
    report.slope_defined = true;
  }
  return report;
}

std::vector<double> depletion_curve(const PolicySpec& policy,
                                    const std::vector<RolloutTree>& trees,
                                    double B0, const CostModel& costs,
                                    const EvalConfig& cfg) {
  if (trees.empty()) throw std::invalid_argument("depletion_curve: no trees");
  const int horizon = tree_horizon(trees.front());
  std::vector<double> sums(static_cast<std::size_t>(horizon), 0.0);
  for (const RolloutTree& tree : trees) {
    EpisodeResult ep =
        replay_policy_on_tree(tree, policy, B0, costs, cfg.eta, cfg.gamma);
    for (int t = 0; t < horizon; ++t)
      sums[static_cast<std::size_t>(t)] +=
          t < ep.decisions
              ? std::max(ep.budget_trace[static_cast<std::size_t>(t)], 0.0)
              : 0.0;
  }
  for (double& s : sums) s /= static_cast<double>(trees.size());
  return sums;
}

AblationKind ablation_from_name(const std::string& name) {
  if (name == "no-hbr" || name == "no-relabel") return AblationKind::NoHbr;
  if (name == "no-budget-state") return AblationKind::NoBudgetState;
  if (name == "log-budget") return AblationKind::LogBudget;
  if (name == "bins10") return AblationKind::Bins10;
  throw std::invalid_argument("unknown ablation: " + name);
}

std::string ablation_name(AblationKind kind) {
  switch (kind) {
    case AblationKind::NoHbr:
      return "no-hbr";
    case AblationKind::NoBudgetState:
      return "no-budget-state";
    case AblationKind::LogBudget:
      return "log-budget";
    case AblationKind::Bins10:
      return "bins10";
  }
  throw std::invalid_argument("unknown ablation kind");
}

AblationResult run_ablation(const AblationConfig& ablation,
                            const std::vector<RawTrajectory>& raws,
                            const SplitAssignment& splits,
                            const std::vector<RolloutTree>& test_trees,
                            const RelabelConfig& relabel_cfg,
                            const CqlConfig& train_cfg, const CostModel& costs,
                            const EvalConfig& eval_cfg) {
  RelabelConfig variant = relabel_cfg;
  switch (ablation.kind) {
    case AblationKind::NoHbr:
      variant.virtual_budgets = {ablation.no_hbr_budget};
      variant.encoding = BudgetEncoding::Linear;
      break;
    case AblationKind::NoBudgetState:
      variant.encoding = BudgetEncoding::None;
      break;
    case AblationKind::LogBudget:
      variant.encoding = BudgetEncoding::Log;
      break;
    case AblationKind::Bins10:
      variant.encoding = BudgetEncoding::Bins10;
      break;
  }

  AblationResult result;
  result.encoding = variant.encoding;
  std::vector<RelabeledEpisode> episodes = expand_dataset(raws, variant);
  TransitionArrays train_data =
      episodes_to_arrays(episodes, splits, Split::Train);
  result.trained = train_cql(train_data, train_cfg);

  auto ckpt = std::make_shared<const MlpParams>(result.trained.params);
  const std::string prefix = "cql-" + ablation_name(ablation.kind);
  if (ablation.kind == AblationKind::NoHbr) {
    for (double B0 : eval_cfg.eval_budgets) {
      PolicySpec policy =
          make_q_lambda(ckpt, variant.encoding, 0.0, prefix + ":0");
      result.reports.push_back(
          evaluate(policy, test_trees, B0, costs, eval_cfg));
    }
  } else {
    result.reports =
        lambda_sweep(ckpt, variant.encoding, test_trees,
                     eval_cfg.primary_eval_budget, costs, eval_cfg, prefix);
  }
  return result;
}

std::vector<RolloutTree> build_trees(const std::vector<std::uint64_t>& ids,
                                     const EnvConfig& cfg) {
  std::vector<RolloutTree> trees;
  trees.reserve(ids.size());
  for (std::uint64_t id : ids) trees.push_back(build_tree(id, cfg));
  return trees;
}

TransitionArrays episodes_to_arrays(const std::vector<RelabeledEpisode>& eps,
                                    const SplitAssignment& splits,
                                    Split split) {
  std::size_t count = 0;
  Eigen::Index dim = 0;
  for (const RelabeledEpisode& ep : eps) {
    if (splits.at(ep.session_id) != split) continue;
    count += ep.episode.transitions.size();
    if (!ep.episode.transitions.empty())
      dim = ep.episode.transitions.front().obs.values.size();
  }
  TransitionArrays arrays;
  arrays.obs.resize(dim, static_cast<Eigen::Index>(count));
  arrays.next_obs.resize(dim, static_cast<Eigen::Index>(count));
  arrays.actions.resize(count);
  arrays.rewards.resize(static_cast<Eigen::Index>(count));
  arrays.terminals.resize(count);
  std::size_t i = 0;
  for (const RelabeledEpisode& ep : eps) {
    if (splits.at(ep.session_id) != split) continue;
    for (const Transition& tr : ep.episode.transitions) {
      arrays.obs.col(static_cast<Eigen::Index>(i)) = tr.obs.values;
      arrays.next_obs.col(static_cast<Eigen::Index>(i)) = tr.next_obs.values;
      arrays.actions[i] = action_index(tr.action);
      arrays.rewards[static_cast<Eigen::Index>(i)] = tr.reward;
      arrays.terminals[i] = tr.terminal ? 1 : 0;
      i += 1;
    }
  }
  return arrays;
}

void write_reports(const std::filesystem::path& path,
                   const std::vector<EvalReport>& reports) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw FormatError("cannot write report: " + path.string());
    out << "policy,budget,lambda,avg_cost,bankruptcy_rate,strong_usage_pct,"
           "avg_return,n_episodes\n";
    char buf[512];
    for (const EvalReport& r : reports) {
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu\n",
                    r.policy.c_str(), r.budget, r.lambda, r.avg_cost,
                    r.bankruptcy_rate, r.strong_usage_pct, r.avg_return,
                    r.n_episodes);
      out << buf;
    }
  }
  std::filesystem::rename(tmp, path);
}

std::vector<EvalReport> read_reports(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open report: " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("empty report file: " + path.string());
  if (line != "policy,budget,lambda,avg_cost,bankruptcy_rate,strong_usage_pct,avg_return,n_episodes")
    throw FormatError("unexpected report header in " + path.string());
  std::vector<EvalReport> reports;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string field;
    EvalReport r;
    auto next = [&]() {
      if (!std::getline(is, field, ','))
        throw FormatError("short report row in " + path.string());
      return field;
    };
    r.policy = next();
    r.budget = std::stod(next());
    r.lambda = std::stod(next());
    r.avg_cost = std::stod(next());
    r.bankruptcy_rate = std::stod(next());
    r.strong_usage_pct = std::stod(next());
    r.avg_return = std::stod(next());
    r.n_episodes = std::stoull(next());
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace broute
