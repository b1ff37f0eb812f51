#include <doctest.h>

#include <cmath>
#include <limits>

#include "broute/mdp.hpp"

using namespace broute;

namespace {

Episode episode_with_rewards(const std::vector<double>& rewards) {
  Episode ep;
  ep.initial_budget = 1000;
  for (double r : rewards) {
    Transition t;
    t.reward = r;
    ep.transitions.push_back(t);
  }
  return ep;
}

}  // namespace

TEST_SUITE("mdp") {

TEST_CASE("update_budget basic arithmetic") {
  BudgetState b{1.0, 5000};
  CHECK(update_budget(b, 2000).remaining == doctest::Approx(0.6).epsilon(1e-15));

  BudgetState half{0.5, 5000};
  CHECK(update_budget(half, 0).remaining == 0.5);

  BudgetState low{0.03, 5000};
  BudgetState after = update_budget(low, 188);
  CHECK(after.remaining == doctest::Approx(-0.0076).epsilon(1e-12));
  CHECK(is_bankrupt(after));
}

TEST_CASE("update_budget rejects bad input") {
  BudgetState b{1.0, 5000};
  CHECK_THROWS_AS(update_budget(b, std::numeric_limits<double>::quiet_NaN()),
                  std::invalid_argument);
  CHECK_THROWS_AS(update_budget(b, -1.0), std::invalid_argument);
  BudgetState no_total{1.0, 0.0};
  CHECK_THROWS_AS(update_budget(no_total, 10.0), std::invalid_argument);
}

TEST_CASE("bankruptcy boundary is inclusive") {
  CHECK_FALSE(is_bankrupt(BudgetState{0.0001, 5000}));
  CHECK(is_bankrupt(BudgetState{0.0, 5000}));
  CHECK(is_bankrupt(BudgetState{-0.2, 5000}));
}

TEST_CASE("step_reward applies the penalty only on bankruptcy") {
  CHECK(step_reward(0.8, false, 5.0) == 0.8);
  CHECK(step_reward(0.8, true, 5.0) == doctest::Approx(-4.2).epsilon(1e-15));
  CHECK(step_reward(0.0, true, 5.0) == -5.0);
  CHECK_THROWS_AS(step_reward(1.2, false, 5.0), std::invalid_argument);
  CHECK_THROWS_AS(step_reward(-0.1, false, 5.0), std::invalid_argument);
  CHECK_THROWS_AS(step_reward(0.5, false, -1.0), std::invalid_argument);
}

TEST_CASE("discounted_return") {
  CHECK(discounted_return(episode_with_rewards({1.0}), 0.99) == 1.0);
  CHECK(discounted_return(episode_with_rewards({0.5, 0.5}), 1.0) == 1.0);
  // 0.8 + 0.99*0.7 + 0.99^2*(-4.3)
  CHECK(discounted_return(episode_with_rewards({0.8, 0.7, -4.3}), 0.99) ==
        doctest::Approx(-2.72143).epsilon(1e-12));
  CHECK_THROWS_AS(discounted_return(Episode{}, 0.99), std::invalid_argument);
  CHECK_THROWS_AS(discounted_return(episode_with_rewards({1.0}), 1.5),
                  std::invalid_argument);
}

TEST_CASE("encode_observation linear") {
  Eigen::VectorXd f(2);
  f << 0.1, 0.2;
  Observation obs = encode_observation(f, 0.6, BudgetEncoding::Linear);
  REQUIRE(obs.values.size() == 3);
  CHECK(obs.values[0] == 0.1);
  CHECK(obs.values[1] == 0.2);
  CHECK(obs.values[2] == 0.6);

  // negative budgets clamp to zero before encoding
  CHECK(encode_observation(f, -0.5, BudgetEncoding::Linear).values[2] == 0.0);
  CHECK(encode_observation(f, 1.7, BudgetEncoding::Linear).values[2] == 1.0);
}

TEST_CASE("encode_observation bins10 top-bin rule") {
  Eigen::VectorXd f(2);
  f << 0.1, 0.2;
  Observation obs = encode_observation(f, 1.0, BudgetEncoding::Bins10);
  REQUIRE(obs.values.size() == 12);
  for (int i = 2; i < 11; ++i) CHECK(obs.values[i] == 0.0);
  CHECK(obs.values[11] == 1.0);

  Observation mid = encode_observation(f, 0.35, BudgetEncoding::Bins10);
  CHECK(mid.values[2 + 3] == 1.0);
  CHECK(mid.values.tail(10).sum() == 1.0);
}

TEST_CASE("encode_observation log floor") {
  Eigen::VectorXd f(2);
  f << 0.1, 0.2;
  Observation obs = encode_observation(f, 0.0, BudgetEncoding::Log);
  CHECK(obs.values[2] == doctest::Approx(-13.815510557964274).epsilon(1e-14));
}

TEST_CASE("encode_observation none and errors") {
  Eigen::VectorXd f(4);
  f << 1, 2, 3, 4;
  CHECK(encode_observation(f, 0.5, BudgetEncoding::None).values.size() == 4);
  Eigen::VectorXd bad(2);
  bad << 1.0, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(encode_observation(bad, 0.5, BudgetEncoding::Linear),
                  std::invalid_argument);
}

TEST_CASE("encoding output dims") {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(7);
  CHECK(encode_observation(f, 0.5, BudgetEncoding::None).values.size() == 7);
  CHECK(encode_observation(f, 0.5, BudgetEncoding::Linear).values.size() == 8);
  CHECK(encode_observation(f, 0.5, BudgetEncoding::Log).values.size() == 8);
  CHECK(encode_observation(f, 0.5, BudgetEncoding::Bins10).values.size() == 17);
}

TEST_CASE("encoding names round trip") {
  for (BudgetEncoding e : {BudgetEncoding::Linear, BudgetEncoding::Log,
                           BudgetEncoding::Bins10, BudgetEncoding::None})
    CHECK(encoding_from_name(encoding_name(e)) == e);
  CHECK_THROWS_AS(encoding_from_name("exp"), std::invalid_argument);
}

}  // TEST_SUITE
