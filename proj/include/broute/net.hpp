#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace broute {

// Fully-connected ReLU network with a linear 2-output head (one Q per
// action). 64-bit weights throughout so finite-difference checks stay tight.
struct MlpLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

struct MlpParams {
  std::vector<MlpLayer> layers;

  int input_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols());
  }
  int output_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows());
  }
  std::size_t parameter_count() const;
  bool same_shape(const MlpParams& other) const;
};

struct GradBuffer {
  std::vector<MlpLayer> layers;  // same shapes as the params they belong to

  void set_zero();
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<MlpLayer> m;  // first moments
  std::vector<MlpLayer> v;  // second moments
  std::uint64_t step = 0;
  AdamConfig config;
};

// Activations cached by forward() for the matching backward() call.
// inputs[0] is the input batch; inputs[l] is layer l's post-ReLU input.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> pre_activations;
};

// Glorot-uniform weights, zero biases; deterministic per seed.
MlpParams init_params(const std::vector<int>& layer_dims, std::uint64_t seed);

GradBuffer make_grad_buffer(const MlpParams& params);
AdamState make_adam_state(const MlpParams& params, const AdamConfig& config);

// batch is column-major: one observation per column. Returns the output
// batch (output_dim x n).
Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& batch,
                        ForwardCache* cache = nullptr);

// Reverse-mode pass. output_grad holds dLoss/dOutput for the batch that
// produced `cache`; any 1/batch factors belong to the caller.
void backward(const MlpParams& params, const ForwardCache& cache,
              const Eigen::MatrixXd& output_grad, GradBuffer& grads);

// Bias-corrected Adam update, in place.
void adam_step(MlpParams& params, const GradBuffer& grads, AdamState& state);

inline MlpParams sync_target(const MlpParams& online) { return online; }

// Checkpoint layout: magic "SQRB", format version u32, layer count u32,
// then per layer rows/cols u32 followed by row-major little-endian f64
// weights then bias. Optional Adam block appended after a presence flag.
void save_checkpoint(const std::filesystem::path& path,
                     const MlpParams& params,
                     const AdamState* adam = nullptr);
MlpParams load_checkpoint(const std::filesystem::path& path,
                          AdamState* adam = nullptr);

std::vector<char> serialize_params(const MlpParams& params,
                                   const AdamState* adam = nullptr);
MlpParams deserialize_params(const std::vector<char>& bytes,
                             AdamState* adam = nullptr);

// Sidecar key=value metadata written next to checkpoints.
struct CheckpointMeta {
  std::string encoding = "linear";
  int feature_dim = 0;
  std::string config_digest;
  std::string algo;
  std::uint64_t seed = 0;
};

void save_checkpoint_meta(const std::filesystem::path& checkpoint_path,
                          const CheckpointMeta& meta);
CheckpointMeta load_checkpoint_meta(const std::filesystem::path& checkpoint_path);

}  // namespace broute
