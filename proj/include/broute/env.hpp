#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "broute/mdp.hpp"
#include "broute/rng.hpp"

namespace broute {

struct QualityCurve {
  double intercept = 0.0;
  double slope = 0.0;
};

// Session generator parameters. Defaults give the weak model a steeply
// degrading quality curve and the strong model a nearly flat one, so the
// strong model's advantage grows with difficulty.
struct EnvConfig {
  int n_sessions = 1000;
  int horizon = 4;
  int feature_dim = 32;
  QualityCurve weak_quality{0.85, -0.60};
  QualityCurve strong_quality{0.90, -0.15};
  double quality_noise_sd = 0.05;
  double weak_cost_mean = 188.0;
  double weak_cost_jitter = 0.10;  // +/- fraction of mean
  double strong_cost_mean = 2000.0;
  double strong_cost_jitter = 0.10;
  double difficulty_drift = 0.05;
  double difficulty_escalation = 0.10;  // scaled by turn/horizon
  double difficulty_noise_sd = 0.08;
  double initial_difficulty_lo = 0.05;
  double initial_difficulty_hi = 0.45;
  double feature_noise_sd = 0.05;
  std::uint64_t seed = 1;
};

// One turn of a counterfactual rollout: both actions' outcomes materialized.
struct TurnNode {
  int turn = 1;  // 1-based
  double difficulty = 0.0;
  Eigen::VectorXd features;
  std::array<double, 2> quality{};  // [weak, strong], clamped to [0,1]
  std::array<double, 2> cost{};     // realized pseudo-tokens, positive
  std::array<std::unique_ptr<TurnNode>, 2> children;  // empty at leaves

  bool is_leaf() const { return !children[0]; }
};

struct RolloutTree {
  std::uint64_t session_id = 0;
  std::unique_ptr<TurnNode> root;
  std::uint64_t config_hash = 0;
};

struct RawTurn {
  Eigen::VectorXd features;
  Action action = Action::Weak;
  double quality = 0.0;
  double cost = 0.0;
};

// One root-to-leaf path through a rollout tree. path_id is the branch
// bitstring: character t is '0' (weak) or '1' (strong) at turn t+1.
struct RawTrajectory {
  std::uint64_t session_id = 0;
  std::string path_id;
  std::vector<RawTurn> turns;
};

double sample_quality(double difficulty, Action action, const EnvConfig& cfg,
                      Rng& rng);

double sample_cost(Action action, const EnvConfig& cfg, Rng& rng);

// Difficulty recurrence for the child of a node at `turn` (1-based).
double next_difficulty(double d, int turn, const EnvConfig& cfg, Rng& rng);

// Fixed random projection of [difficulty | one-hot(turn) | domain scalar],
// plus observation noise. Deterministic given (cfg.seed, inputs, stream).
Eigen::VectorXd embed_features(double difficulty, int turn,
                               std::uint64_t session_tag, const EnvConfig& cfg,
                               Rng& rng);

// The projection used by embed_features; exposed so tests can check that
// difficulty is recoverable along a known direction.
Eigen::MatrixXd feature_projection(const EnvConfig& cfg);

// Complete binary tree of depth cfg.horizon. Each node draws from a stream
// keyed by (cfg.seed, session_id, path bits), so regeneration is bit-exact
// and sessions are independent.
RolloutTree build_tree(std::uint64_t session_id, const EnvConfig& cfg);

// All 2^horizon root-to-leaf paths, in path_id (lexicographic) order.
std::vector<RawTrajectory> extract_paths(const RolloutTree& tree);

std::uint64_t env_config_hash(const EnvConfig& cfg);

}  // namespace broute
