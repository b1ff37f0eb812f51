#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "broute/env.hpp"
#include "broute/mdp.hpp"
#include "broute/policy.hpp"
#include "broute/relabel.hpp"
#include "broute/train.hpp"

namespace broute {

struct EvalConfig {
  std::vector<double> eval_budgets{1500, 3000, 5000, 8000};
  std::vector<double> lambda_grid{0.0,    3e-5, 1e-4, 1.5e-4,
                                  3e-4, 5e-4, 1e-3};
  double primary_eval_budget = 5000;
  double eta = 5.0;
  double gamma = 0.99;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
};

struct EpisodeResult {
  double total_cost = 0.0;  // includes the bankrupting call's cost
  bool bankrupt = false;
  int strong_decisions = 0;
  int decisions = 0;
  double ret = 0.0;  // discounted, penalty included
  std::vector<double> budget_trace;  // fraction before each decision
  std::vector<int> action_trace;     // 0/1 per decision
  double final_remaining = 1.0;      // fraction after the last decision
};

struct EvalReport {
  std::string policy;
  double budget = 0.0;
  double lambda = 0.0;
  double avg_cost = 0.0;
  double bankruptcy_rate = 0.0;   // in [0,1]
  double strong_usage_pct = 0.0;  // in [0,100]
  double avg_return = 0.0;
  std::size_t n_episodes = 0;
};

struct SensitivityReport {
  std::vector<double> bin_probability;  // P(strong) per budget-fraction bin
  std::vector<std::size_t> bin_count;
  double slope = 0.0;  // OLS of strong indicator on budget fraction
  bool slope_defined = false;
};

// Walks the tree from the root, querying the policy at every node with the
// node features + current budget encoded per the policy's encoding. Stops at
// bankruptcy or the leaf.
EpisodeResult replay_policy_on_tree(const RolloutTree& tree,
                                    const PolicySpec& policy, double B0,
                                    const CostModel& costs, double eta,
                                    double gamma);

EvalReport evaluate(const PolicySpec& policy,
                    const std::vector<RolloutTree>& trees, double B0,
                    const CostModel& costs, const EvalConfig& cfg);

// One evaluate per lambda over a shared tree set.
std::vector<EvalReport> lambda_sweep(std::shared_ptr<const MlpParams> ckpt,
                                     BudgetEncoding encoding,
                                     const std::vector<RolloutTree>& trees,
                                     double B0, const CostModel& costs,
                                     const EvalConfig& cfg,
                                     const std::string& id_prefix = "cql");

// Pools (budget fraction at decision, chose-strong) pairs across all
// budgets and episodes, bins them, and fits a decision-level OLS slope.
SensitivityReport budget_sensitivity(const PolicySpec& policy,
                                     const std::vector<RolloutTree>& trees,
                                     const std::vector<double>& budgets,
                                     const CostModel& costs,
                                     const EvalConfig& cfg, int bins = 10);

// Mean remaining fraction before each decision step; episodes that died
// early contribute 0 from then on.
std::vector<double> depletion_curve(const PolicySpec& policy,
                                    const std::vector<RolloutTree>& trees,
                                    double B0, const CostModel& costs,
                                    const EvalConfig& cfg);

enum class AblationKind { NoHbr, NoBudgetState, LogBudget, Bins10 };

AblationKind ablation_from_name(const std::string& name);
std::string ablation_name(AblationKind kind);

struct AblationConfig {
  AblationKind kind = AblationKind::NoHbr;
  double no_hbr_budget = 3000;  // single training tier for the no-relabel run
};

struct AblationResult {
  TrainResult trained;
  BudgetEncoding encoding = BudgetEncoding::Linear;
  std::vector<EvalReport> reports;
};

// Re-relabels the raw corpus per the ablation, retrains CQL, and evaluates:
// multi-budget at lambda 0 for NoHbr, the lambda grid at the primary budget
// for the encoding variants.
AblationResult run_ablation(const AblationConfig& ablation,
                            const std::vector<RawTrajectory>& raws,
                            const SplitAssignment& splits,
                            const std::vector<RolloutTree>& test_trees,
                            const RelabelConfig& relabel_cfg,
                            const CqlConfig& train_cfg, const CostModel& costs,
                            const EvalConfig& eval_cfg);

// Helpers shared by the CLI and tests.
std::vector<RolloutTree> build_trees(const std::vector<std::uint64_t>& ids,
                                     const EnvConfig& cfg);
TransitionArrays episodes_to_arrays(const std::vector<RelabeledEpisode>& eps,
                                    const SplitAssignment& splits, Split split);

void write_reports(const std::filesystem::path& path,
                   const std::vector<EvalReport>& reports);
std::vector<EvalReport> read_reports(const std::filesystem::path& path);

}  // namespace broute
