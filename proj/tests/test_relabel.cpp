#include <doctest.h>

#include <map>

#include "broute/relabel.hpp"
#include "broute/rng.hpp"

using namespace broute;

namespace {

// Independent replay oracle: walks the turns with nothing but the budget
// recurrence and the penalty rule. Written against the contract, not the
// implementation; keep it dumb.
RelabeledEpisode naive_relabel(const RawTrajectory& raw, double B0, double eta,
                               BudgetEncoding enc) {
  RelabeledEpisode out;
  out.session_id = raw.session_id;
  out.path_id = raw.path_id;
  out.virtual_budget = B0;
  out.episode.initial_budget = B0;
  double b = 1.0;
  for (std::size_t t = 0; t < raw.turns.size(); ++t) {
    const double b_next = b - raw.turns[t].cost / B0;
    const bool dead = b_next <= 0.0;
    const bool last = t + 1 == raw.turns.size();
    Transition tr;
    tr.obs = encode_observation(raw.turns[t].features, b, enc);
    tr.action = raw.turns[t].action;
    tr.reward = raw.turns[t].quality - (dead ? eta : 0.0);
    Eigen::VectorXd nf = last ? Eigen::VectorXd::Zero(raw.turns[t].features.size())
                              : raw.turns[t + 1].features;
    tr.next_obs = encode_observation(nf, b_next, enc);
    tr.terminal = dead || last;
    tr.bankrupt = dead;
    tr.turn = static_cast<int>(t) + 1;
    tr.virtual_budget = B0;
    tr.raw_session_id = raw.session_id;
    out.episode.transitions.push_back(tr);
    if (dead) break;
    b = b_next;
  }
  return out;
}

bool transitions_identical(const Transition& a, const Transition& b) {
  return a.obs.values == b.obs.values && a.action == b.action &&
         a.reward == b.reward && a.next_obs.values == b.next_obs.values &&
         a.terminal == b.terminal && a.bankrupt == b.bankrupt &&
         a.turn == b.turn && a.virtual_budget == b.virtual_budget &&
         a.raw_session_id == b.raw_session_id;
}

bool episodes_identical(const RelabeledEpisode& a, const RelabeledEpisode& b) {
  if (a.session_id != b.session_id || a.path_id != b.path_id ||
      a.virtual_budget != b.virtual_budget ||
      a.episode.initial_budget != b.episode.initial_budget)
    return false;
  if (a.episode.transitions.size() != b.episode.transitions.size()) return false;
  for (std::size_t i = 0; i < a.episode.transitions.size(); ++i)
    if (!transitions_identical(a.episode.transitions[i],
                               b.episode.transitions[i]))
      return false;
  return true;
}

RawTrajectory fixed_cost_trajectory(const std::vector<double>& costs,
                                    const std::vector<double>& qualities) {
  RawTrajectory raw;
  raw.session_id = 1;
  for (std::size_t t = 0; t < costs.size(); ++t) {
    RawTurn turn;
    turn.features = Eigen::VectorXd::Constant(3, static_cast<double>(t));
    turn.action = costs[t] > 1000 ? Action::Strong : Action::Weak;
    raw.path_id.push_back(turn.action == Action::Strong ? '1' : '0');
    turn.quality = qualities[t];
    turn.cost = costs[t];
    raw.turns.push_back(turn);
  }
  return raw;
}

RawTrajectory random_trajectory(Rng& rng, int horizon) {
  RawTrajectory raw;
  raw.session_id = rng.next_u64() % 1000;
  for (int t = 0; t < horizon; ++t) {
    RawTurn turn;
    turn.features = Eigen::VectorXd::Zero(4);
    for (int i = 0; i < 4; ++i) turn.features[i] = rng.normal(0, 1);
    turn.action = rng.uniform() < 0.5 ? Action::Weak : Action::Strong;
    raw.path_id.push_back(turn.action == Action::Strong ? '1' : '0');
    turn.quality = rng.uniform();
    turn.cost = rng.uniform(50.0, 3000.0);
    raw.turns.push_back(turn);
  }
  return raw;
}

}  // namespace

TEST_SUITE("relabel") {

TEST_CASE("tight budget truncates at the bankrupting turn") {
  RawTrajectory raw =
      fixed_cost_trajectory({188, 2000, 188, 188}, {0.9, 0.8, 0.7, 0.6});
  RelabeledEpisode ep =
      relabel_trajectory(raw, 500, 5.0, 500, BudgetEncoding::Linear);
  REQUIRE(ep.episode.transitions.size() == 2);
  const Transition& t1 = ep.episode.transitions[0];
  const Transition& t2 = ep.episode.transitions[1];
  CHECK(t1.obs.values[3] == 1.0);
  CHECK(t2.obs.values[3] == doctest::Approx(0.624).epsilon(1e-12));
  CHECK_FALSE(t1.terminal);
  CHECK(t2.terminal);
  CHECK(t2.bankrupt);
  CHECK(t2.reward == doctest::Approx(0.8 - 5.0).epsilon(1e-12));
  CHECK(t2.next_obs.values[3] == 0.0);  // clamped from -3.376
}

TEST_CASE("ample budget keeps the full horizon") {
  RawTrajectory raw =
      fixed_cost_trajectory({188, 2000, 188, 188}, {0.9, 0.8, 0.7, 0.6});
  RelabeledEpisode ep =
      relabel_trajectory(raw, 3000, 5.0, 3000, BudgetEncoding::Linear);
  REQUIRE(ep.episode.transitions.size() == 4);
  const Transition& last = ep.episode.transitions.back();
  CHECK(last.terminal);
  CHECK_FALSE(last.bankrupt);
  CHECK(last.reward == 0.6);
  CHECK(last.next_obs.values[3] == doctest::Approx(436.0 / 3000.0).epsilon(1e-12));

  // rewards equal qualities when no budget ever depletes
  for (const Transition& t : ep.episode.transitions) {
    CHECK_FALSE(t.bankrupt);
  }
  CHECK(ep.episode.transitions[0].reward == 0.9);
  CHECK(ep.episode.transitions[1].reward == 0.8);
}

TEST_CASE("expand_dataset counts and ordering") {
  std::vector<RawTrajectory> raws;
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    RawTrajectory raw = random_trajectory(rng, 4);
    for (RawTurn& t : raw.turns) t.cost = 10.0;  // never bankrupts
    raws.push_back(raw);
  }
  RelabelConfig cfg;
  std::vector<RelabeledEpisode> eps = expand_dataset(raws, cfg);
  CHECK(eps.size() == 50);
  std::size_t transitions = 0;
  for (const RelabeledEpisode& ep : eps) transitions += ep.episode.transitions.size();
  CHECK(transitions == 200);

  // outer order raw, inner order ascending budget
  CHECK(eps[0].virtual_budget == 500);
  CHECK(eps[4].virtual_budget == 8000);
  CHECK(eps[5].virtual_budget == 500);
  CHECK(eps[0].session_id == raws[0].session_id);

  RawTrajectory mixed =
      fixed_cost_trajectory({188, 2000, 188, 188}, {0.9, 0.8, 0.7, 0.6});
  RelabelConfig two;
  two.virtual_budgets = {500, 3000};
  std::vector<RelabeledEpisode> pair = expand_dataset({mixed}, two);
  REQUIRE(pair.size() == 2);
  CHECK(pair[0].episode.transitions.size() == 2);
  CHECK(pair[1].episode.transitions.size() == 4);
}

TEST_CASE("oracle equivalence on random trajectories") {
  Rng rng(123);
  RelabelConfig cfg;
  for (int i = 0; i < 100; ++i) {
    RawTrajectory raw = random_trajectory(rng, 4);
    std::vector<RelabeledEpisode> got = expand_dataset({raw}, cfg);
    REQUIRE(got.size() == cfg.virtual_budgets.size());
    for (std::size_t b = 0; b < cfg.virtual_budgets.size(); ++b) {
      RelabeledEpisode expected = naive_relabel(raw, cfg.virtual_budgets[b],
                                                cfg.eta, cfg.encoding);
      CHECK(episodes_identical(got[b], expected));
    }
  }
}

TEST_CASE("prefix identity and truncation-iff-bankrupt") {
  Rng rng(77);
  RelabelConfig cfg;
  for (int i = 0; i < 50; ++i) {
    RawTrajectory raw = random_trajectory(rng, 4);
    for (const RelabeledEpisode& ep : expand_dataset({raw}, cfg)) {
      const auto& ts = ep.episode.transitions;
      REQUIRE(!ts.empty());
      // (features, action, quality-derived reward, cost-derived budget)
      // prefix matches the source exactly
      for (std::size_t t = 0; t < ts.size(); ++t) {
        CHECK(ts[t].obs.values.head(4) == raw.turns[t].features);
        CHECK(ts[t].action == raw.turns[t].action);
        const double quality = ts[t].reward + (ts[t].bankrupt ? cfg.eta : 0.0);
        CHECK(quality == doctest::Approx(raw.turns[t].quality).epsilon(1e-14));
        CHECK(quality >= 0.0);
        CHECK(quality <= 1.0);
      }
      // shorter than source iff final transition bankrupt
      CHECK((ts.size() < raw.turns.size()) == ts.back().bankrupt);
      // only the final transition may be terminal
      for (std::size_t t = 0; t + 1 < ts.size(); ++t) {
        CHECK_FALSE(ts[t].terminal);
        CHECK_FALSE(ts[t].bankrupt);
      }
      CHECK(ts.back().terminal);
      // budget observations strictly decrease
      for (std::size_t t = 1; t < ts.size(); ++t)
        CHECK(ts[t].obs.values[4] < ts[t - 1].obs.values[4]);
    }
  }
}

TEST_CASE("split_sessions is order independent and seeded") {
  std::vector<std::uint64_t> ids;
  for (std::uint64_t i = 0; i < 1000; ++i) ids.push_back(i);
  SplitAssignment a = split_sessions(ids, {0.8, 0.1, 0.1}, 7);

  std::vector<std::uint64_t> shuffled = ids;
  Rng rng(9);
  for (std::size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[rng.index(i)]);
  SplitAssignment b = split_sessions(shuffled, {0.8, 0.1, 0.1}, 7);
  CHECK(a.by_session == b.by_session);

  SplitAssignment c = split_sessions(ids, {0.8, 0.1, 0.1}, 8);
  CHECK(a.by_session != c.by_session);

  // proportions within +/-3% of (800,100,100) for this hash realization
  CHECK(a.sessions_in(Split::Train).size() >= 770);
  CHECK(a.sessions_in(Split::Train).size() <= 830);
  CHECK(a.sessions_in(Split::Val).size() >= 70);
  CHECK(a.sessions_in(Split::Val).size() <= 130);
  CHECK(a.sessions_in(Split::FinalTest).size() >= 70);
  CHECK(a.sessions_in(Split::FinalTest).size() <= 130);

  CHECK_THROWS_AS(split_sessions({1, 1}, {0.8, 0.1, 0.1}, 7),
                  std::invalid_argument);
  CHECK_THROWS_AS(split_sessions(ids, {0.8, 0.1, 0.2}, 7),
                  std::invalid_argument);
}

TEST_CASE("dataset_stats per-tier bankruptcy") {
  // all-weak, ample budget: no bankruptcies
  std::vector<RawTrajectory> weak_raws;
  for (int i = 0; i < 5; ++i)
    weak_raws.push_back(
        fixed_cost_trajectory({188, 188, 188, 188}, {0.5, 0.5, 0.5, 0.5}));
  RelabelConfig ample;
  ample.virtual_budgets = {8000};
  DatasetStats s1 = dataset_stats(expand_dataset(weak_raws, ample));
  CHECK(s1.tiers.size() == 1);
  CHECK(s1.tiers[0].bankruptcy_rate() == 0.0);
  CHECK(s1.action_counts[1] == 0);

  // all-strong at 500: first turn bankrupts everything
  std::vector<RawTrajectory> strong_raws;
  for (int i = 0; i < 5; ++i)
    strong_raws.push_back(
        fixed_cost_trajectory({2000, 2000, 2000, 2000}, {0.5, 0.5, 0.5, 0.5}));
  RelabelConfig tight;
  tight.virtual_budgets = {500};
  DatasetStats s2 = dataset_stats(expand_dataset(strong_raws, tight));
  CHECK(s2.tiers[0].bankruptcy_rate() == 1.0);
  CHECK(s2.transitions == 5);  // one transition per episode

  // bankruptcy rate per tier never increases with the budget
  Rng rng(31);
  std::vector<RawTrajectory> raws;
  for (int i = 0; i < 60; ++i) raws.push_back(random_trajectory(rng, 4));
  DatasetStats s3 = dataset_stats(expand_dataset(raws, RelabelConfig{}));
  for (std::size_t t = 1; t < s3.tiers.size(); ++t) {
    CHECK(s3.tiers[t].virtual_budget > s3.tiers[t - 1].virtual_budget);
    CHECK(s3.tiers[t].bankruptcy_rate() <= s3.tiers[t - 1].bankruptcy_rate());
  }
}

}  // TEST_SUITE
