#include "broute/mdp.hpp"

#include <cmath>
#include <stdexcept>

#include "broute/errors.hpp"

namespace broute {

std::string encoding_name(BudgetEncoding e) {
  switch (e) {
    case BudgetEncoding::Linear:
      return "linear";
    case BudgetEncoding::Log:
      return "log";
    case BudgetEncoding::Bins10:
      return "bins10";
    case BudgetEncoding::None:
      return "none";
  }
  throw std::invalid_argument("unknown budget encoding");
}

BudgetEncoding encoding_from_name(const std::string& name) {
  if (name == "linear") return BudgetEncoding::Linear;
  if (name == "log") return BudgetEncoding::Log;
  if (name == "bins10") return BudgetEncoding::Bins10;
  if (name == "none") return BudgetEncoding::None;
  throw std::invalid_argument("unknown budget encoding: " + name);
}

BudgetState update_budget(const BudgetState& b, double realized_cost) {
  if (!std::isfinite(realized_cost) || !std::isfinite(b.remaining))
    throw std::invalid_argument("update_budget: non-finite input");
  if (realized_cost < 0.0)
    throw std::invalid_argument("update_budget: negative cost");
  if (!(b.total > 0.0))
    throw std::invalid_argument("update_budget: non-positive total budget");
  return BudgetState{b.remaining - realized_cost / b.total, b.total};
}

double step_reward(double quality, bool bankrupt_next, double eta) {
  if (!(quality >= 0.0 && quality <= 1.0))
    throw std::invalid_argument("step_reward: quality outside [0,1]");
  if (eta < 0.0) throw std::invalid_argument("step_reward: negative eta");
  return quality - (bankrupt_next ? eta : 0.0);
}

double discounted_return(const Episode& episode, double gamma) {
  if (episode.transitions.empty())
    throw std::invalid_argument("discounted_return: empty episode");
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("discounted_return: gamma outside [0,1]");
  double total = 0.0;
  double weight = 1.0;
  for (const Transition& t : episode.transitions) {
    total += weight * t.reward;
    weight *= gamma;
  }
  return total;
}

Observation encode_observation(const Eigen::VectorXd& features,
                               double budget_remaining, BudgetEncoding enc) {
  if (!features.allFinite())
    throw std::invalid_argument("encode_observation: non-finite features");
  const double clamped = std::clamp(budget_remaining, 0.0, 1.0);
  const Eigen::Index d = features.size();
  Observation obs;
  obs.encoding = enc;
  switch (enc) {
    case BudgetEncoding::None:
      obs.values = features;
      return obs;
    case BudgetEncoding::Linear:
      obs.values.resize(d + 1);
      obs.values.head(d) = features;
      obs.values[d] = clamped;
      return obs;
    case BudgetEncoding::Log:
      obs.values.resize(d + 1);
      obs.values.head(d) = features;
      obs.values[d] = std::log(clamped + 1e-6);
      return obs;
    case BudgetEncoding::Bins10: {
      obs.values.resize(d + 10);
      obs.values.head(d) = features;
      obs.values.tail(10).setZero();
      int bin = static_cast<int>(std::floor(clamped * 10.0));
      if (bin > 9) bin = 9;  // budget == 1.0 goes to the top bin
      obs.values[d + bin] = 1.0;
      return obs;
    }
  }
  throw std::invalid_argument("encode_observation: unknown encoding");
}

}  // namespace broute
