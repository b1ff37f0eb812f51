#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace broute {

// Action indices are part of the wire format: weak = 0, strong = 1.
enum class Action : int { Weak = 0, Strong = 1 };

inline int action_index(Action a) { return static_cast<int>(a); }

// Nominal per-call costs in pseudo-tokens, used by cost-penalized action
// selection. Realized per-step costs live in the rollout data.
struct CostModel {
  double weak_cost = 188.0;
  double strong_cost = 2000.0;

  double cost(Action a) const {
    return a == Action::Weak ? weak_cost : strong_cost;
  }
};

// Remaining session budget as a fraction of the initial allocation.
// `remaining` starts at 1.0 and is never clamped here; observations clamp.
struct BudgetState {
  double remaining = 1.0;
  double total = 0.0;  // pseudo-tokens
};

enum class BudgetEncoding { Linear, Log, Bins10, None };

// Number of components the encoding appends to the feature vector.
inline int encoding_width(BudgetEncoding e) {
  switch (e) {
    case BudgetEncoding::Linear:
    case BudgetEncoding::Log:
      return 1;
    case BudgetEncoding::Bins10:
      return 10;
    case BudgetEncoding::None:
      return 0;
  }
  return 0;
}

std::string encoding_name(BudgetEncoding e);
BudgetEncoding encoding_from_name(const std::string& name);

struct Observation {
  Eigen::VectorXd values;
  BudgetEncoding encoding = BudgetEncoding::Linear;
};

struct Transition {
  Observation obs;
  Action action = Action::Weak;
  double reward = 0.0;
  Observation next_obs;
  bool terminal = false;
  bool bankrupt = false;
  int turn = 1;  // 1-based
  double virtual_budget = 0.0;
  std::uint64_t raw_session_id = 0;
};

struct Episode {
  std::vector<Transition> transitions;
  double initial_budget = 0.0;
};

// b_{t+1} = b_t - cost / total. No clamping: bankruptcy is a separate check.
BudgetState update_budget(const BudgetState& b, double realized_cost);

inline bool is_bankrupt(const BudgetState& b) { return b.remaining <= 0.0; }

// quality - eta * 1(bankrupt_next)
double step_reward(double quality, bool bankrupt_next, double eta);

// sum_t gamma^(t-1) r_t
double discounted_return(const Episode& episode, double gamma);

// Appends the encoded budget to the feature vector. The budget is clamped to
// [0,1] before encoding; a full budget (1.0) falls in the top one-hot bin.
Observation encode_observation(const Eigen::VectorXd& features,
                               double budget_remaining, BudgetEncoding enc);

}  // namespace broute
