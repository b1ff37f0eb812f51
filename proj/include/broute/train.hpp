#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "broute/net.hpp"
#include "broute/rng.hpp"

namespace broute {

// Column-major transition storage: one transition per column. This is the
// training-time view of a dataset; file formats live in dataset.hpp.
struct TransitionArrays {
  Eigen::MatrixXd obs;       // dim x n
  Eigen::MatrixXd next_obs;  // dim x n
  std::vector<int> actions;
  Eigen::VectorXd rewards;
  std::vector<std::uint8_t> terminals;

  std::size_t size() const { return actions.size(); }
  int dim() const { return static_cast<int>(obs.rows()); }
};

struct CqlConfig {
  double alpha = 5.0;
  double gamma = 0.99;
  double lr = 3e-4;
  int batch_size = 256;
  int gradient_steps = 20000;
  int target_sync_interval = 1000;
  int log_interval = 500;
  std::vector<int> hidden{64, 64};
  std::uint64_t seed = 3;
};

struct BcConfig {
  double lr = 3e-4;
  int batch_size = 256;
  int gradient_steps = 12000;
  int log_interval = 500;
  std::vector<int> hidden{64, 64};
  std::uint64_t seed = 3;
};

struct TrainLogRow {
  int step = 0;
  double bellman_loss = 0.0;
  double cql_penalty = 0.0;  // unscaled logsumexp gap; >= 0 by construction
  double mean_q_data = 0.0;
  double mean_logsumexp_q = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
};

void write_train_log(const std::filesystem::path& path, const TrainLog& log);

struct CqlLossStats {
  double loss = 0.0;
  double bellman_loss = 0.0;
  double penalty = 0.0;
  double mean_q_data = 0.0;
  double mean_logsumexp_q = 0.0;
};

// y = r + gamma * (1 - terminal) * max_a Qhat(s', a)
double bellman_target(double reward, bool terminal,
                      const Eigen::Ref<const Eigen::VectorXd>& target_q_next,
                      double gamma);

// Penalized TD loss: alpha * mean[logsumexp_a Q(s,a) - Q(s,a_data)]
//                    + 0.5 * mean[(Q(s,a_data) - y)^2],
// with y treated as a constant. Fills `grads` with the exact gradient.
CqlLossStats cql_loss(const TransitionArrays& batch, const MlpParams& params,
                      const MlpParams& target_params, double alpha,
                      double gamma, GradBuffer& grads);

// Mean softmax cross-entropy of the 2-logit head against the data action.
double bc_loss(const TransitionArrays& batch, const MlpParams& params,
               GradBuffer& grads);

// Uniform with replacement; deterministic per rng stream position.
TransitionArrays sample_minibatch(const TransitionArrays& data,
                                  int batch_size, Rng& rng);
void sample_minibatch_into(const TransitionArrays& data, int batch_size,
                           Rng& rng, TransitionArrays& batch);

struct TrainResult {
  MlpParams params;
  AdamState adam;
  TrainLog log;
};

TrainResult train_cql(const TransitionArrays& data, const CqlConfig& cfg);
TrainResult train_bc(const TransitionArrays& data, const BcConfig& cfg);

}  // namespace broute
