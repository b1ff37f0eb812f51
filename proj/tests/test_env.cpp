#include <doctest.h>

#include <functional>
#include <map>
#include <set>

#include "broute/env.hpp"

using namespace broute;

namespace {

EnvConfig noiseless_config() {
  EnvConfig cfg;
  cfg.quality_noise_sd = 0.0;
  cfg.weak_cost_jitter = 0.0;
  cfg.strong_cost_jitter = 0.0;
  cfg.difficulty_noise_sd = 0.0;
  cfg.feature_noise_sd = 0.0;
  return cfg;
}

bool trees_equal(const TurnNode& a, const TurnNode& b) {
  if (a.turn != b.turn || a.difficulty != b.difficulty) return false;
  if (a.features != b.features) return false;
  if (a.quality != b.quality || a.cost != b.cost) return false;
  if (a.is_leaf() != b.is_leaf()) return false;
  if (a.is_leaf()) return true;
  return trees_equal(*a.children[0], *b.children[0]) &&
         trees_equal(*a.children[1], *b.children[1]);
}

}  // namespace

TEST_SUITE("env") {

TEST_CASE("sample_quality follows the curves with noise off") {
  EnvConfig cfg = noiseless_config();
  Rng rng(1);
  CHECK(sample_quality(0.0, Action::Weak, cfg, rng) == 0.85);
  CHECK(sample_quality(1.0, Action::Strong, cfg, rng) ==
        doctest::Approx(0.75).epsilon(1e-15));
  CHECK(sample_quality(1.0, Action::Weak, cfg, rng) ==
        doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(sample_quality(1.5, Action::Weak, cfg, rng),
                  std::invalid_argument);
}

TEST_CASE("quality gap grows linearly in difficulty") {
  EnvConfig cfg = noiseless_config();
  Rng rng(1);
  for (double d = 0.0; d <= 1.0; d += 0.125) {
    const double gap = sample_quality(d, Action::Strong, cfg, rng) -
                       sample_quality(d, Action::Weak, cfg, rng);
    CHECK(gap == doctest::Approx(0.05 + 0.45 * d).epsilon(1e-12));
    CHECK(gap >= 0.0);
  }
}

TEST_CASE("sample_cost honors means and jitter bounds") {
  EnvConfig cfg = noiseless_config();
  Rng rng(2);
  CHECK(sample_cost(Action::Weak, cfg, rng) == 188.0);
  CHECK(sample_cost(Action::Strong, cfg, rng) == 2000.0);

  cfg.weak_cost_jitter = 0.1;
  for (int i = 0; i < 200; ++i) {
    const double c = sample_cost(Action::Weak, cfg, rng);
    CHECK(c >= 169.2);
    CHECK(c <= 206.8);
  }
}

TEST_CASE("next_difficulty recurrence") {
  EnvConfig cfg = noiseless_config();
  cfg.difficulty_drift = 0.0;
  cfg.difficulty_escalation = 0.0;
  Rng rng(3);
  CHECK(next_difficulty(0.5, 0, cfg, rng) == 0.5);

  cfg.difficulty_drift = 0.05;
  cfg.difficulty_escalation = 0.10;
  CHECK(next_difficulty(0.5, 2, cfg, rng) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(next_difficulty(0.98, 3, cfg, rng) == 1.0);  // clamp
  CHECK_THROWS_AS(next_difficulty(-0.1, 1, cfg, rng), std::invalid_argument);
}

TEST_CASE("embed_features determinism and session separation") {
  EnvConfig cfg;
  cfg.feature_noise_sd = 0.0;
  Rng rng_a(7);
  Rng rng_b(7);
  Eigen::VectorXd a = embed_features(0.4, 2, 11, cfg, rng_a);
  Eigen::VectorXd b = embed_features(0.4, 2, 11, cfg, rng_b);
  CHECK(a == b);

  Rng rng_c(7);
  Eigen::VectorXd c = embed_features(0.4, 2, 12, cfg, rng_c);
  CHECK(a != c);
}

TEST_CASE("embed_features difficulty direction is the projection column") {
  EnvConfig cfg;
  cfg.feature_noise_sd = 0.0;
  Rng rng(9);
  Eigen::VectorXd lo = embed_features(0.2, 3, 5, cfg, rng);
  Eigen::VectorXd hi = embed_features(0.8, 3, 5, cfg, rng);
  Eigen::VectorXd diff = hi - lo;
  Eigen::VectorXd expected = 0.6 * feature_projection(cfg).col(0);
  CHECK((diff - expected).norm() < 1e-12);
}

TEST_CASE("build_tree shape and determinism") {
  EnvConfig cfg;
  cfg.feature_dim = 8;
  RolloutTree tree = build_tree(42, cfg);

  std::function<int(const TurnNode&)> count = [&](const TurnNode& n) -> int {
    if (n.is_leaf()) return 1;
    return 1 + count(*n.children[0]) + count(*n.children[1]);
  };
  CHECK(count(*tree.root) == 15);  // 1+2+4+8 for horizon 4

  RolloutTree again = build_tree(42, cfg);
  CHECK(trees_equal(*tree.root, *again.root));
  CHECK(tree.config_hash == again.config_hash);

  RolloutTree other = build_tree(43, cfg);
  CHECK_FALSE(trees_equal(*tree.root, *other.root));

  cfg.horizon = 1;
  RolloutTree tiny = build_tree(1, cfg);
  CHECK(count(*tiny.root) == 1);
  CHECK(extract_paths(tiny).size() == 2);
}

TEST_CASE("extract_paths count, balance, and bit decoding") {
  EnvConfig cfg;
  cfg.feature_dim = 4;
  RolloutTree tree = build_tree(7, cfg);
  std::vector<RawTrajectory> paths = extract_paths(tree);
  REQUIRE(paths.size() == 16);

  std::size_t records = 0;
  std::array<int, 2> actions{0, 0};
  std::set<std::string> ids;
  for (const RawTrajectory& p : paths) {
    CHECK(p.turns.size() == 4);
    CHECK(p.path_id.size() == 4);
    ids.insert(p.path_id);
    for (std::size_t t = 0; t < p.turns.size(); ++t) {
      records += 1;
      actions[action_index(p.turns[t].action)] += 1;
      CHECK(action_index(p.turns[t].action) == (p.path_id[t] == '1' ? 1 : 0));
      CHECK(p.turns[t].cost > 0.0);
      CHECK(p.turns[t].quality >= 0.0);
      CHECK(p.turns[t].quality <= 1.0);
    }
  }
  CHECK(records == 64);
  CHECK(actions[0] == 32);
  CHECK(actions[1] == 32);
  CHECK(ids.size() == 16);

  // paths sharing a branch prefix replay identical nodes
  const RawTrajectory* p0101 = nullptr;
  const RawTrajectory* p0110 = nullptr;
  for (const RawTrajectory& p : paths) {
    if (p.path_id == "0101") p0101 = &p;
    if (p.path_id == "0110") p0110 = &p;
  }
  REQUIRE(p0101 != nullptr);
  REQUIRE(p0110 != nullptr);
  CHECK(p0101->turns[0].features == p0110->turns[0].features);
  CHECK(p0101->turns[1].features == p0110->turns[1].features);
  CHECK(p0101->turns[2].features == p0110->turns[2].features);
  CHECK(p0101->turns[3].features != p0110->turns[3].features);
}

TEST_CASE("difficulty is non-decreasing along paths with noise off") {
  EnvConfig cfg = noiseless_config();
  cfg.feature_dim = 4;
  RolloutTree tree = build_tree(3, cfg);
  std::function<void(const TurnNode&)> walk = [&](const TurnNode& n) {
    if (n.is_leaf()) return;
    for (int b = 0; b < 2; ++b) {
      CHECK(n.children[b]->difficulty >= n.difficulty);
      walk(*n.children[b]);
    }
  };
  walk(*tree.root);
}

}  // TEST_SUITE
