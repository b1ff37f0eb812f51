#include "broute/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <stdexcept>

namespace broute {

namespace {

constexpr std::uint64_t kProjectionTag = 0x70726f6a;
constexpr std::uint64_t kDomainTag = 0x646f6d;

// Stream key for the node reached by the given branch bits. A leading 1 bit
// marks the path length so "" / "0" / "00" all map to distinct keys.
std::uint64_t path_key(const std::string& bits) {
  std::uint64_t key = 1;
  for (char c : bits) key = (key << 1) | (c == '1' ? 1u : 0u);
  return key;
}

Rng node_stream(const EnvConfig& cfg, std::uint64_t session_id,
                const std::string& bits) {
  return Rng(hash_combine(hash_combine(cfg.seed, session_id), path_key(bits)));
}

double domain_scalar(std::uint64_t session_tag) {
  return u64_to_unit(mix64(hash_combine(session_tag, kDomainTag)));
}

Eigen::VectorXd embed_with_projection(double difficulty, int turn,
                                      std::uint64_t session_tag,
                                      const EnvConfig& cfg,
                                      const Eigen::MatrixXd& proj, Rng& rng) {
  Eigen::VectorXd input = Eigen::VectorXd::Zero(1 + cfg.horizon + 1);
  input[0] = difficulty;
  input[turn] = 1.0;  // one-hot of 1-based turn
  input[cfg.horizon + 1] = domain_scalar(session_tag);
  Eigen::VectorXd out = proj * input;
  if (cfg.feature_noise_sd > 0.0)
    for (Eigen::Index i = 0; i < out.size(); ++i)
      out[i] += rng.normal(0.0, cfg.feature_noise_sd);
  return out;
}

}  // namespace

double sample_quality(double difficulty, Action action, const EnvConfig& cfg,
                      Rng& rng) {
  if (!(difficulty >= 0.0 && difficulty <= 1.0))
    throw std::invalid_argument("sample_quality: difficulty outside [0,1]");
  const QualityCurve& curve =
      action == Action::Weak ? cfg.weak_quality : cfg.strong_quality;
  double q = curve.intercept + curve.slope * difficulty +
             rng.normal(0.0, cfg.quality_noise_sd);
  return std::clamp(q, 0.0, 1.0);
}

double sample_cost(Action action, const EnvConfig& cfg, Rng& rng) {
  const double mean =
      action == Action::Weak ? cfg.weak_cost_mean : cfg.strong_cost_mean;
  const double jitter =
      action == Action::Weak ? cfg.weak_cost_jitter : cfg.strong_cost_jitter;
  double c = mean * (1.0 + rng.uniform(-jitter, jitter));
  return std::max(c, 1e-9);
}

double next_difficulty(double d, int turn, const EnvConfig& cfg, Rng& rng) {
  if (!(d >= 0.0 && d <= 1.0))
    throw std::invalid_argument("next_difficulty: difficulty outside [0,1]");
  double next = d + cfg.difficulty_drift +
                cfg.difficulty_escalation *
                    (static_cast<double>(turn) / cfg.horizon) +
                rng.normal(0.0, cfg.difficulty_noise_sd);
  return std::clamp(next, 0.0, 1.0);
}

Eigen::MatrixXd feature_projection(const EnvConfig& cfg) {
  const int in_dim = 1 + cfg.horizon + 1;  // difficulty, turn one-hot, domain
  Eigen::MatrixXd proj(cfg.feature_dim, in_dim);
  Rng stream(hash_combine(cfg.seed, kProjectionTag));
  const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (int r = 0; r < proj.rows(); ++r)
    for (int c = 0; c < proj.cols(); ++c)
      proj(r, c) = stream.normal(0.0, scale);
  return proj;
}

Eigen::VectorXd embed_features(double difficulty, int turn,
                               std::uint64_t session_tag, const EnvConfig& cfg,
                               Rng& rng) {
  if (!(difficulty >= 0.0 && difficulty <= 1.0))
    throw std::invalid_argument("embed_features: difficulty outside [0,1]");
  if (turn < 1 || turn > cfg.horizon)
    throw std::invalid_argument("embed_features: turn out of range");
  return embed_with_projection(difficulty, turn, session_tag, cfg,
                               feature_projection(cfg), rng);
}

namespace {

// One stream per node; fixed draw order: difficulty, feature noise,
// qualities, costs. The root draws its initial difficulty uniformly, every
// other node steps its parent's difficulty forward.
std::unique_ptr<TurnNode> make_node(const EnvConfig& cfg,
                                    std::uint64_t session_id,
                                    const std::string& bits, int turn,
                                    double parent_difficulty,
                                    const Eigen::MatrixXd& proj) {
  Rng stream = node_stream(cfg, session_id, bits);
  auto node = std::make_unique<TurnNode>();
  node->turn = turn;
  node->difficulty =
      turn == 1
          ? std::clamp(stream.uniform(cfg.initial_difficulty_lo,
                                      cfg.initial_difficulty_hi),
                       0.0, 1.0)
          : next_difficulty(parent_difficulty, turn - 1, cfg, stream);
  node->features = embed_with_projection(node->difficulty, turn, session_id,
                                         cfg, proj, stream);
  node->quality[0] = sample_quality(node->difficulty, Action::Weak, cfg, stream);
  node->quality[1] =
      sample_quality(node->difficulty, Action::Strong, cfg, stream);
  node->cost[0] = sample_cost(Action::Weak, cfg, stream);
  node->cost[1] = sample_cost(Action::Strong, cfg, stream);

  if (turn < cfg.horizon) {
    for (int branch = 0; branch < 2; ++branch) {
      node->children[branch] =
          make_node(cfg, session_id, bits + (branch == 0 ? '0' : '1'),
                    turn + 1, node->difficulty, proj);
    }
  }
  return node;
}

}  // namespace

RolloutTree build_tree(std::uint64_t session_id, const EnvConfig& cfg) {
  if (cfg.horizon < 1) throw std::invalid_argument("build_tree: horizon < 1");
  RolloutTree tree;
  tree.session_id = session_id;
  tree.config_hash = env_config_hash(cfg);
  tree.root =
      make_node(cfg, session_id, "", 1, 0.0, feature_projection(cfg));
  return tree;
}

std::vector<RawTrajectory> extract_paths(const RolloutTree& tree) {
  if (!tree.root) throw std::invalid_argument("extract_paths: empty tree");
  std::vector<RawTrajectory> paths;
  std::vector<RawTurn> stack;
  std::string bits;

  std::function<void(const TurnNode&)> walk = [&](const TurnNode& node) {
    for (int branch = 0; branch < 2; ++branch) {
      RawTurn turn;
      turn.features = node.features;
      turn.action = branch == 0 ? Action::Weak : Action::Strong;
      turn.quality = node.quality[branch];
      turn.cost = node.cost[branch];
      stack.push_back(std::move(turn));
      bits.push_back(branch == 0 ? '0' : '1');
      if (node.is_leaf()) {
        paths.push_back(RawTrajectory{tree.session_id, bits, stack});
      } else {
        walk(*node.children[branch]);
      }
      bits.pop_back();
      stack.pop_back();
    }
  };
  walk(*tree.root);
  return paths;
}

namespace {

void hash_double(std::uint64_t& h, double v) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  h = hash_combine(h, bits);
}

}  // namespace

std::uint64_t env_config_hash(const EnvConfig& cfg) {
  std::uint64_t h = 0x656e76;
  h = hash_combine(h, static_cast<std::uint64_t>(cfg.n_sessions));
  h = hash_combine(h, static_cast<std::uint64_t>(cfg.horizon));
  h = hash_combine(h, static_cast<std::uint64_t>(cfg.feature_dim));
  hash_double(h, cfg.weak_quality.intercept);
  hash_double(h, cfg.weak_quality.slope);
  hash_double(h, cfg.strong_quality.intercept);
  hash_double(h, cfg.strong_quality.slope);
  hash_double(h, cfg.quality_noise_sd);
  hash_double(h, cfg.weak_cost_mean);
  hash_double(h, cfg.weak_cost_jitter);
  hash_double(h, cfg.strong_cost_mean);
  hash_double(h, cfg.strong_cost_jitter);
  hash_double(h, cfg.difficulty_drift);
  hash_double(h, cfg.difficulty_escalation);
  hash_double(h, cfg.difficulty_noise_sd);
  hash_double(h, cfg.initial_difficulty_lo);
  hash_double(h, cfg.initial_difficulty_hi);
  hash_double(h, cfg.feature_noise_sd);
  h = hash_combine(h, cfg.seed);
  return h;
}

}  // namespace broute
