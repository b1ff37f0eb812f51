#pragma once

#include <memory>
#include <optional>
#include <string>

#include "broute/mdp.hpp"
#include "broute/net.hpp"
#include "broute/rng.hpp"

namespace broute {

enum class PolicyKind {
  QLambda,      // argmax_a [Q(s,a) - lambda * c(a)]
  BcArgmax,     // argmax logit
  AlwaysWeak,
  AlwaysStrong,
  RandomMix,    // strong with probability p_strong
  BudgetHeuristic,  // strong iff remaining tokens per turn >= strong cost
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::AlwaysWeak;
  std::shared_ptr<const MlpParams> checkpoint;  // QLambda / BcArgmax
  BudgetEncoding encoding = BudgetEncoding::Linear;
  double lambda = 0.0;    // QLambda, >= 0
  double p_strong = 0.5;  // RandomMix, in [0,1]
  std::uint64_t seed = 0;  // RandomMix
  std::string id = "always-weak";  // label used in reports
};

PolicySpec make_q_lambda(std::shared_ptr<const MlpParams> checkpoint,
                         BudgetEncoding encoding, double lambda,
                         std::string id = "");
PolicySpec make_bc_argmax(std::shared_ptr<const MlpParams> checkpoint,
                          BudgetEncoding encoding, std::string id = "bc");
PolicySpec make_always(Action a);
PolicySpec make_random_mix(double p_strong, std::uint64_t seed);
PolicySpec make_budget_heuristic();

// Ties break to Weak everywhere. `rng` is the caller's per-episode stream;
// only RandomMix consumes it.
Action select_action(const PolicySpec& policy, const Observation& obs,
                     double remaining_budget_tokens, int remaining_turns,
                     const CostModel& costs, Rng& rng);

// The lambda at/above which Weak wins for the given Q pair, or nullopt when
// Weak wins for every lambda >= 0.
std::optional<double> lambda_threshold(double q_weak, double q_strong,
                                       const CostModel& costs);

// Parses CLI policy specs: always-weak | always-strong | heuristic |
// random:P:SEED | cql:CKPT[:LAMBDA] | bc:CKPT. Loads checkpoints eagerly.
PolicySpec parse_policy_spec(const std::string& text);

}  // namespace broute
