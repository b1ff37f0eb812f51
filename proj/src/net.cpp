#include "broute/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "broute/errors.hpp"
#include "broute/rng.hpp"

namespace broute {

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const MlpLayer& l : layers)
    n += static_cast<std::size_t>(l.weights.size()) + l.bias.size();
  return n;
}

bool MlpParams::same_shape(const MlpParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weights.rows() != other.layers[i].weights.rows() ||
        layers[i].weights.cols() != other.layers[i].weights.cols())
      return false;
  }
  return true;
}

void GradBuffer::set_zero() {
  for (MlpLayer& l : layers) {
    l.weights.setZero();
    l.bias.setZero();
  }
}

MlpParams init_params(const std::vector<int>& layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2)
    throw std::invalid_argument("init_params: need at least input and output dims");
  for (int d : layer_dims)
    if (d <= 0) throw std::invalid_argument("init_params: zero-size layer");

  MlpParams params;
  Rng rng(hash_combine(seed, 0x696e6974));
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    MlpLayer layer;
    layer.weights.resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c)
        layer.weights(r, c) = rng.uniform(-bound, bound);
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

GradBuffer make_grad_buffer(const MlpParams& params) {
  GradBuffer grads;
  for (const MlpLayer& l : params.layers) {
    MlpLayer g;
    g.weights = Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols());
    g.bias = Eigen::VectorXd::Zero(l.bias.size());
    grads.layers.push_back(std::move(g));
  }
  return grads;
}

AdamState make_adam_state(const MlpParams& params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const MlpLayer& l : params.layers) {
    MlpLayer zero;
    zero.weights = Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols());
    zero.bias = Eigen::VectorXd::Zero(l.bias.size());
    state.m.push_back(zero);
    state.v.push_back(std::move(zero));
  }
  return state;
}

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& batch,
                        ForwardCache* cache) {
  if (params.layers.empty()) throw std::invalid_argument("forward: empty net");
  if (batch.rows() != params.input_dim())
    throw std::invalid_argument(
        "forward: input dim mismatch: batch has " +
        std::to_string(batch.rows()) + " rows, net expects " +
        std::to_string(params.input_dim()));

  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  Eigen::MatrixXd activation = batch;
  const std::size_t n_layers = params.layers.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (cache) cache->inputs.push_back(activation);
    Eigen::MatrixXd z =
        (params.layers[l].weights * activation).colwise() +
        params.layers[l].bias;
    if (l + 1 < n_layers) {
      if (cache) cache->pre_activations.push_back(z);
      activation = z.cwiseMax(0.0);
    } else {
      activation = std::move(z);  // linear head
    }
  }
  return activation;
}

void backward(const MlpParams& params, const ForwardCache& cache,
              const Eigen::MatrixXd& output_grad, GradBuffer& grads) {
  const std::size_t n_layers = params.layers.size();
  if (cache.inputs.size() != n_layers)
    throw std::invalid_argument("backward: cache does not match network");
  if (grads.layers.size() != n_layers)
    throw std::invalid_argument("backward: grad buffer shape mismatch");
  if (output_grad.rows() != params.output_dim() ||
      output_grad.cols() != cache.inputs[0].cols())
    throw std::invalid_argument("backward: output grad shape mismatch");

  Eigen::MatrixXd delta = output_grad;
  for (std::size_t l = n_layers; l-- > 0;) {
    grads.layers[l].weights.noalias() = delta * cache.inputs[l].transpose();
    grads.layers[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = params.layers[l].weights.transpose() * delta;
      // ReLU gate from the previous layer's pre-activation
      delta = back.cwiseProduct(
          (cache.pre_activations[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
}

namespace {

template <typename Mat>
void adam_update(Mat& param, const Mat& grad, Mat& m, Mat& v,
                 const AdamConfig& c, double bc1, double bc2) {
  m = c.beta1 * m + (1.0 - c.beta1) * grad;
  v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  param.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
}

}  // namespace

void adam_step(MlpParams& params, const GradBuffer& grads, AdamState& state) {
  if (grads.layers.size() != params.layers.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  const AdamConfig& c = state.config;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    adam_update(params.layers[l].weights, grads.layers[l].weights,
                state.m[l].weights, state.v[l].weights, c, bc1, bc2);
    adam_update(params.layers[l].bias, grads.layers[l].bias, state.m[l].bias,
                state.v[l].bias, c, bc1, bc2);
  }
}

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'R', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<char>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}

struct Reader {
  const std::vector<char>& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size())
      throw FormatError("checkpoint truncated at byte " + std::to_string(pos));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos++]))
           << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos++]))
           << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
};

void put_layer_values(std::vector<char>& out, const MlpLayer& layer) {
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
      put_f64(out, layer.weights(r, c));
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
    put_f64(out, layer.bias[i]);
}

void read_layer_values(Reader& in, MlpLayer& layer) {
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
      layer.weights(r, c) = in.f64();
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
    layer.bias[i] = in.f64();
}

}  // namespace

std::vector<char> serialize_params(const MlpParams& params,
                                   const AdamState* adam) {
  std::vector<char> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(params.layers.size()));
  for (const MlpLayer& layer : params.layers) {
    put_u32(out, static_cast<std::uint32_t>(layer.weights.rows()));
    put_u32(out, static_cast<std::uint32_t>(layer.weights.cols()));
    put_layer_values(out, layer);
  }
  out.push_back(adam ? 1 : 0);
  if (adam) {
    put_u64(out, adam->step);
    put_f64(out, adam->config.lr);
    put_f64(out, adam->config.beta1);
    put_f64(out, adam->config.beta2);
    put_f64(out, adam->config.eps);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      put_layer_values(out, adam->m[l]);
      put_layer_values(out, adam->v[l]);
    }
  }
  return out;
}

MlpParams deserialize_params(const std::vector<char>& bytes, AdamState* adam) {
  Reader in{bytes};
  in.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("checkpoint has bad magic");
  in.pos = 4;
  const std::uint32_t version = in.u32();
  if (version != kFormatVersion)
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version));
  const std::uint32_t n_layers = in.u32();
  if (n_layers == 0 || n_layers > 64)
    throw FormatError("checkpoint has implausible layer count " +
                      std::to_string(n_layers));
  MlpParams params;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const std::uint32_t rows = in.u32();
    const std::uint32_t cols = in.u32();
    if (rows == 0 || cols == 0 || rows > 1u << 20 || cols > 1u << 20)
      throw FormatError("checkpoint layer has implausible shape");
    MlpLayer layer;
    layer.weights.resize(rows, cols);
    layer.bias.resize(rows);
    read_layer_values(in, layer);
    params.layers.push_back(std::move(layer));
  }
  in.need(1);
  const bool has_adam = bytes[in.pos++] != 0;
  if (has_adam && adam) {
    *adam = make_adam_state(params, AdamConfig{});
    adam->step = in.u64();
    adam->config.lr = in.f64();
    adam->config.beta1 = in.f64();
    adam->config.beta2 = in.f64();
    adam->config.eps = in.f64();
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      read_layer_values(in, adam->m[l]);
      read_layer_values(in, adam->v[l]);
    }
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path,
                     const MlpParams& params, const AdamState* adam) {
  const std::vector<char> bytes = serialize_params(params, adam);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::filesystem::rename(tmp, path);
}

MlpParams load_checkpoint(const std::filesystem::path& path, AdamState* adam) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return deserialize_params(bytes, adam);
}

void save_checkpoint_meta(const std::filesystem::path& checkpoint_path,
                          const CheckpointMeta& meta) {
  const std::filesystem::path path = checkpoint_path.string() + ".meta";
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw FormatError("cannot write meta: " + path.string());
    out << "encoding=" << meta.encoding << "\n"
        << "feature_dim=" << meta.feature_dim << "\n"
        << "config_digest=" << meta.config_digest << "\n"
        << "algo=" << meta.algo << "\n"
        << "seed=" << meta.seed << "\n";
  }
  std::filesystem::rename(tmp, path);
}

CheckpointMeta load_checkpoint_meta(
    const std::filesystem::path& checkpoint_path) {
  const std::filesystem::path path = checkpoint_path.string() + ".meta";
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open checkpoint meta: " + path.string());
  CheckpointMeta meta;
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "encoding") meta.encoding = value;
    else if (key == "feature_dim") meta.feature_dim = std::stoi(value);
    else if (key == "config_digest") meta.config_digest = value;
    else if (key == "algo") meta.algo = value;
    else if (key == "seed") meta.seed = std::stoull(value);
  }
  return meta;
}

}  // namespace broute
