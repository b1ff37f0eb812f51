#include "broute/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "broute/errors.hpp"

namespace broute {

namespace {

constexpr std::uint64_t kTrainStreamTag = 0x747261696e;

void check_batch(const TransitionArrays& batch) {
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  if (batch.obs.cols() != static_cast<Eigen::Index>(batch.size()) ||
      batch.next_obs.cols() != static_cast<Eigen::Index>(batch.size()) ||
      batch.rewards.size() != static_cast<Eigen::Index>(batch.size()) ||
      batch.terminals.size() != batch.size())
    throw std::invalid_argument("batch arrays are inconsistent");
}

double logsumexp2(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

double bellman_target(double reward, bool terminal,
                      const Eigen::Ref<const Eigen::VectorXd>& target_q_next,
                      double gamma) {
  if (terminal) return reward;
  return reward + gamma * target_q_next.maxCoeff();
}

CqlLossStats cql_loss(const TransitionArrays& batch, const MlpParams& params,
                      const MlpParams& target_params, double alpha,
                      double gamma, GradBuffer& grads) {
  check_batch(batch);
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());

  ForwardCache cache;
  Eigen::MatrixXd q = forward(params, batch.obs, &cache);       // 2 x n
  Eigen::MatrixXd q_next = forward(target_params, batch.next_obs);

  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(q.rows(), n);
  CqlLossStats stats;
  const double inv_n = 1.0 / static_cast<double>(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = batch.actions[static_cast<std::size_t>(i)];
    const double q_data = q(a, i);
    const double lse = logsumexp2(q(0, i), q(1, i));
    const double y = bellman_target(batch.rewards[i],
                                    batch.terminals[static_cast<std::size_t>(i)] != 0,
                                    q_next.col(i), gamma);
    const double td = q_data - y;

    stats.penalty += lse - q_data;
    stats.bellman_loss += 0.5 * td * td;
    stats.mean_q_data += q_data;
    stats.mean_logsumexp_q += lse;

    // d/dQ of alpha*(lse - q_data): alpha * (softmax - onehot)
    const double p0 = std::exp(q(0, i) - lse);
    const double p1 = std::exp(q(1, i) - lse);
    dq(0, i) = alpha * inv_n * (p0 - (a == 0 ? 1.0 : 0.0));
    dq(1, i) = alpha * inv_n * (p1 - (a == 1 ? 1.0 : 0.0));
    // d/dQ of 0.5*(q_data - y)^2
    dq(a, i) += inv_n * td;
  }
  stats.penalty *= inv_n;
  stats.bellman_loss *= inv_n;
  stats.mean_q_data *= inv_n;
  stats.mean_logsumexp_q *= inv_n;
  stats.loss = alpha * stats.penalty + stats.bellman_loss;

  backward(params, cache, dq, grads);
  return stats;
}

double bc_loss(const TransitionArrays& batch, const MlpParams& params,
               GradBuffer& grads) {
  check_batch(batch);
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());

  ForwardCache cache;
  Eigen::MatrixXd logits = forward(params, batch.obs, &cache);
  Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(logits.rows(), n);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = batch.actions[static_cast<std::size_t>(i)];
    const double lse = logsumexp2(logits(0, i), logits(1, i));
    loss += lse - logits(a, i);
    dlogits(0, i) = inv_n * (std::exp(logits(0, i) - lse) - (a == 0 ? 1.0 : 0.0));
    dlogits(1, i) = inv_n * (std::exp(logits(1, i) - lse) - (a == 1 ? 1.0 : 0.0));
  }
  backward(params, cache, dlogits, grads);
  return loss * inv_n;
}

void sample_minibatch_into(const TransitionArrays& data, int batch_size,
                           Rng& rng, TransitionArrays& batch) {
  if (data.size() == 0)
    throw std::invalid_argument("sample_minibatch: empty dataset");
  if (batch_size <= 0)
    throw std::invalid_argument("sample_minibatch: batch_size must be positive");
  const Eigen::Index dim = data.obs.rows();
  batch.obs.resize(dim, batch_size);
  batch.next_obs.resize(dim, batch_size);
  batch.actions.resize(static_cast<std::size_t>(batch_size));
  batch.rewards.resize(batch_size);
  batch.terminals.resize(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    const std::size_t j = rng.index(data.size());
    batch.obs.col(i) = data.obs.col(static_cast<Eigen::Index>(j));
    batch.next_obs.col(i) = data.next_obs.col(static_cast<Eigen::Index>(j));
    batch.actions[static_cast<std::size_t>(i)] = data.actions[j];
    batch.rewards[i] = data.rewards[static_cast<Eigen::Index>(j)];
    batch.terminals[static_cast<std::size_t>(i)] = data.terminals[j];
  }
}

TransitionArrays sample_minibatch(const TransitionArrays& data, int batch_size,
                                  Rng& rng) {
  TransitionArrays batch;
  sample_minibatch_into(data, batch_size, rng, batch);
  return batch;
}

namespace {

std::vector<int> full_dims(int input_dim, const std::vector<int>& hidden) {
  std::vector<int> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(2);
  return dims;
}

}  // namespace

TrainResult train_cql(const TransitionArrays& data, const CqlConfig& cfg) {
  if (data.size() == 0) throw std::invalid_argument("train_cql: empty dataset");
  TrainResult result;
  result.params = init_params(full_dims(data.dim(), cfg.hidden), cfg.seed);
  MlpParams target = sync_target(result.params);
  result.adam = make_adam_state(result.params, AdamConfig{cfg.lr});
  GradBuffer grads = make_grad_buffer(result.params);
  Rng rng(hash_combine(cfg.seed, kTrainStreamTag));
  TransitionArrays batch;

  for (int step = 1; step <= cfg.gradient_steps; ++step) {
    sample_minibatch_into(data, cfg.batch_size, rng, batch);
    CqlLossStats stats = cql_loss(batch, result.params, target, cfg.alpha,
                                  cfg.gamma, grads);
    adam_step(result.params, grads, result.adam);
    if (step % cfg.log_interval == 0 || step == cfg.gradient_steps)
      result.log.rows.push_back({step, stats.bellman_loss, stats.penalty,
                                 stats.mean_q_data, stats.mean_logsumexp_q});
    if (cfg.target_sync_interval > 0 && step % cfg.target_sync_interval == 0)
      target = sync_target(result.params);
  }
  return result;
}

TrainResult train_bc(const TransitionArrays& data, const BcConfig& cfg) {
  if (data.size() == 0) throw std::invalid_argument("train_bc: empty dataset");
  TrainResult result;
  result.params = init_params(full_dims(data.dim(), cfg.hidden), cfg.seed);
  result.adam = make_adam_state(result.params, AdamConfig{cfg.lr});
  GradBuffer grads = make_grad_buffer(result.params);
  Rng rng(hash_combine(cfg.seed, kTrainStreamTag));
  TransitionArrays batch;

  for (int step = 1; step <= cfg.gradient_steps; ++step) {
    sample_minibatch_into(data, cfg.batch_size, rng, batch);
    const double loss = bc_loss(batch, result.params, grads);
    adam_step(result.params, grads, result.adam);
    if (step % cfg.log_interval == 0 || step == cfg.gradient_steps) {
      // reuse the shared log schema: cross-entropy in the bellman column
      double mean_logit_data = 0.0;
      double mean_lse = 0.0;
      Eigen::MatrixXd logits = forward(result.params, batch.obs);
      for (Eigen::Index i = 0; i < logits.cols(); ++i) {
        mean_logit_data += logits(batch.actions[static_cast<std::size_t>(i)], i);
        mean_lse += logsumexp2(logits(0, i), logits(1, i));
      }
      mean_logit_data /= static_cast<double>(logits.cols());
      mean_lse /= static_cast<double>(logits.cols());
      result.log.rows.push_back({step, loss, 0.0, mean_logit_data, mean_lse});
    }
  }
  return result;
}

void write_train_log(const std::filesystem::path& path, const TrainLog& log) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw FormatError("cannot write train log: " + path.string());
    out << "step,bellman_loss,cql_penalty,mean_q_data,mean_logsumexp_q\n";
    char buf[256];
    for (const TrainLogRow& row : log.rows) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", row.step,
                    row.bellman_loss, row.cql_penalty, row.mean_q_data,
                    row.mean_logsumexp_q);
      out << buf;
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace broute
