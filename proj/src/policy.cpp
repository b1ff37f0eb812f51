#include "broute/policy.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace broute {

PolicySpec make_q_lambda(std::shared_ptr<const MlpParams> checkpoint,
                         BudgetEncoding encoding, double lambda,
                         std::string id) {
  if (!checkpoint) throw std::invalid_argument("q-lambda: null checkpoint");
  if (lambda < 0.0) throw std::invalid_argument("q-lambda: negative lambda");
  PolicySpec spec;
  spec.kind = PolicyKind::QLambda;
  spec.checkpoint = std::move(checkpoint);
  spec.encoding = encoding;
  spec.lambda = lambda;
  spec.id = id.empty() ? "cql:" + std::to_string(lambda) : std::move(id);
  return spec;
}

PolicySpec make_bc_argmax(std::shared_ptr<const MlpParams> checkpoint,
                          BudgetEncoding encoding, std::string id) {
  if (!checkpoint) throw std::invalid_argument("bc-argmax: null checkpoint");
  PolicySpec spec;
  spec.kind = PolicyKind::BcArgmax;
  spec.checkpoint = std::move(checkpoint);
  spec.encoding = encoding;
  spec.id = std::move(id);
  return spec;
}

PolicySpec make_always(Action a) {
  PolicySpec spec;
  spec.kind =
      a == Action::Weak ? PolicyKind::AlwaysWeak : PolicyKind::AlwaysStrong;
  spec.id = a == Action::Weak ? "always-weak" : "always-strong";
  return spec;
}

PolicySpec make_random_mix(double p_strong, std::uint64_t seed) {
  if (!(p_strong >= 0.0 && p_strong <= 1.0))
    throw std::invalid_argument("random mix: p_strong outside [0,1]");
  PolicySpec spec;
  spec.kind = PolicyKind::RandomMix;
  spec.p_strong = p_strong;
  spec.seed = seed;
  spec.id = "random:" + std::to_string(p_strong);
  return spec;
}

PolicySpec make_budget_heuristic() {
  PolicySpec spec;
  spec.kind = PolicyKind::BudgetHeuristic;
  spec.id = "heuristic";
  return spec;
}

namespace {

Eigen::Vector2d network_scores(const PolicySpec& policy,
                               const Observation& obs) {
  if (!policy.checkpoint)
    throw std::invalid_argument("policy has no checkpoint loaded");
  if (obs.values.size() != policy.checkpoint->input_dim())
    throw std::invalid_argument(
        "observation dim " + std::to_string(obs.values.size()) +
        " does not match checkpoint input dim " +
        std::to_string(policy.checkpoint->input_dim()));
  Eigen::MatrixXd out = forward(*policy.checkpoint, obs.values);
  return out.col(0);
}

}  // namespace

Action select_action(const PolicySpec& policy, const Observation& obs,
                     double remaining_budget_tokens, int remaining_turns,
                     const CostModel& costs, Rng& rng) {
  if (remaining_turns < 1)
    throw std::invalid_argument("select_action: remaining_turns < 1");
  switch (policy.kind) {
    case PolicyKind::AlwaysWeak:
      return Action::Weak;
    case PolicyKind::AlwaysStrong:
      return Action::Strong;
    case PolicyKind::RandomMix:
      return rng.uniform() < policy.p_strong ? Action::Strong : Action::Weak;
    case PolicyKind::BudgetHeuristic:
      return remaining_budget_tokens / remaining_turns >= costs.strong_cost
                 ? Action::Strong
                 : Action::Weak;
    case PolicyKind::BcArgmax: {
      Eigen::Vector2d logits = network_scores(policy, obs);
      return logits[1] > logits[0] ? Action::Strong : Action::Weak;
    }
    case PolicyKind::QLambda: {
      Eigen::Vector2d q = network_scores(policy, obs);
      const double score_weak = q[0] - policy.lambda * costs.weak_cost;
      const double score_strong = q[1] - policy.lambda * costs.strong_cost;
      return score_strong > score_weak ? Action::Strong : Action::Weak;
    }
  }
  throw std::invalid_argument("select_action: unknown policy kind");
}

std::optional<double> lambda_threshold(double q_weak, double q_strong,
                                       const CostModel& costs) {
  if (!(costs.strong_cost > costs.weak_cost))
    throw std::invalid_argument("lambda_threshold: strong cost must exceed weak");
  if (q_strong <= q_weak) return std::nullopt;
  return (q_strong - q_weak) / (costs.strong_cost - costs.weak_cost);
}

namespace {

std::vector<std::string> split_fields(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(text);
  while (std::getline(is, field, sep)) out.push_back(field);
  return out;
}

std::shared_ptr<const MlpParams> load_ckpt(const std::string& path) {
  return std::make_shared<const MlpParams>(load_checkpoint(path));
}

}  // namespace

PolicySpec parse_policy_spec(const std::string& text) {
  const std::vector<std::string> parts = split_fields(text, ':');
  if (parts.empty()) throw std::invalid_argument("empty policy spec");
  const std::string& head = parts[0];

  if (head == "always-weak" && parts.size() == 1) return make_always(Action::Weak);
  if (head == "always-strong" && parts.size() == 1)
    return make_always(Action::Strong);
  if (head == "heuristic" && parts.size() == 1) return make_budget_heuristic();
  if (head == "random") {
    if (parts.size() != 3)
      throw std::invalid_argument("random policy needs random:P:SEED");
    return make_random_mix(std::stod(parts[1]), std::stoull(parts[2]));
  }
  if (head == "cql" || head == "q") {
    if (parts.size() < 2 || parts.size() > 3)
      throw std::invalid_argument("q policy needs cql:CHECKPOINT[:LAMBDA]");
    const double lambda = parts.size() == 3 ? std::stod(parts[2]) : 0.0;
    CheckpointMeta meta = load_checkpoint_meta(parts[1]);
    return make_q_lambda(load_ckpt(parts[1]),
                         encoding_from_name(meta.encoding), lambda,
                         "cql:" + std::to_string(lambda));
  }
  if (head == "bc") {
    if (parts.size() != 2)
      throw std::invalid_argument("bc policy needs bc:CHECKPOINT");
    CheckpointMeta meta = load_checkpoint_meta(parts[1]);
    return make_bc_argmax(load_ckpt(parts[1]),
                          encoding_from_name(meta.encoding));
  }
  throw std::invalid_argument("unknown policy spec: " + text);
}

}  // namespace broute
