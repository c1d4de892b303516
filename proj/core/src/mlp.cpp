#include "quadrl/mlp.hpp"

#include "quadrl/errors.hpp"
#include "quadrl/parallel.hpp"
#include "quadrl/trajectory_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

namespace quadrl {

double huber_loss(double residual, const HuberSpec& spec) {
  const double a = std::abs(residual);
  if (a <= spec.delta) return 0.5 * residual * residual;
  return spec.delta * (a - 0.5 * spec.delta);
}

double huber_derivative(double residual, const HuberSpec& spec) {
  if (std::abs(residual) <= spec.delta) return residual;
  return residual > 0.0 ? spec.delta : -spec.delta;
}

Eigen::Index parameter_count(std::span<const int> layer_sizes) {
  Eigen::Index count = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    count += static_cast<Eigen::Index>(layer_sizes[l]) * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return count;
}

namespace {

void check_layout(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw DimensionError("an Mlp needs at least an input and an output layer");
  for (int n : sizes) {
    if (n <= 0) throw DimensionError("layer sizes must be positive");
  }
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  check_layout(sizes_);
  build_offsets();
  params_ = Eigen::VectorXd::Zero(quadrl::parameter_count(sizes_));
}

Mlp::Mlp(std::vector<int> layer_sizes, Eigen::VectorXd parameters) : sizes_(std::move(layer_sizes)) {
  check_layout(sizes_);
  build_offsets();
  set_parameters(parameters);
}

Mlp Mlp::initialized(std::vector<int> layer_sizes, std::mt19937_64& rng) {
  Mlp net(std::move(layer_sizes));
  for (int l = 0; l + 1 < net.layer_count(); ++l) {
    const double s = 1.0 / std::sqrt(static_cast<double>(net.sizes_[static_cast<std::size_t>(l)]));
    std::uniform_real_distribution<double> dist(-s, s);
    auto w = net.weights(l);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
    }
  }
  return net;
}

void Mlp::build_offsets() {
  offsets_.clear();
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(offset);
    offset += static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
  }
}

void Mlp::set_parameters(const Eigen::VectorXd& parameters) {
  const Eigen::Index expected = quadrl::parameter_count(sizes_);
  if (parameters.size() != expected) {
    throw DimensionError("parameter vector has length " + std::to_string(parameters.size()) +
                         ", expected " + std::to_string(expected));
  }
  params_ = parameters;
}

Mlp::ConstWeightMap Mlp::weights(int layer) const {
  const auto l = static_cast<std::size_t>(layer);
  return ConstWeightMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
}

Mlp::WeightMap Mlp::weights(int layer) {
  const auto l = static_cast<std::size_t>(layer);
  return WeightMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
}

Mlp::ConstBiasMap Mlp::bias(int layer) const {
  const auto l = static_cast<std::size_t>(layer);
  return ConstBiasMap(params_.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]);
}

Mlp::BiasMap Mlp::bias(int layer) {
  const auto l = static_cast<std::size_t>(layer);
  return BiasMap(params_.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]);
}

namespace {

void check_input(const Mlp& net, Eigen::Index length) {
  if (net.layer_count() == 0) throw DimensionError("network has no layers");
  if (length != net.input_dim()) {
    throw DimensionError("input has length " + std::to_string(length) + ", network expects " +
                         std::to_string(net.input_dim()));
  }
}

// Per-layer activations of a batch: acts[0] is the input, acts[L] the output.
std::vector<Eigen::MatrixXd> batch_activations(const Mlp& net,
                                               const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
  const int layers = net.layer_count();
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(static_cast<std::size_t>(layers) + 1);
  acts.emplace_back(inputs);
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = acts.back() * net.weights(l).transpose();
    z.rowwise() += net.bias(l).transpose();
    if (l + 1 < layers) z = z.array().tanh().matrix();
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace

Eigen::VectorXd forward(const Mlp& net, const Eigen::Ref<const Eigen::VectorXd>& input) {
  check_input(net, input.size());
  Eigen::VectorXd h = input;
  const int layers = net.layer_count();
  for (int l = 0; l < layers; ++l) {
    Eigen::VectorXd z = net.weights(l) * h + net.bias(l);
    if (l + 1 < layers) z = z.array().tanh().matrix();
    h = std::move(z);
  }
  return h;
}

Eigen::MatrixXd batch_forward(const Mlp& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
  check_input(net, inputs.cols());
  return std::move(batch_activations(net, inputs).back());
}

Eigen::MatrixXd output_jacobian(const Mlp& net, const Eigen::Ref<const Eigen::VectorXd>& input) {
  check_input(net, input.size());
  const int layers = net.layer_count();

  std::vector<Eigen::VectorXd> acts;
  acts.reserve(static_cast<std::size_t>(layers) + 1);
  acts.emplace_back(input);
  for (int l = 0; l < layers; ++l) {
    Eigen::VectorXd z = net.weights(l) * acts.back() + net.bias(l);
    if (l + 1 < layers) z = z.array().tanh().matrix();
    acts.push_back(std::move(z));
  }

  const Eigen::Index outputs = net.output_dim();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(outputs, net.parameter_count());
  // delta(o, i) = d output_o / d pre-activation_i of the current layer.
  Eigen::MatrixXd delta = Eigen::MatrixXd::Identity(outputs, outputs);
  for (int l = layers - 1; l >= 0; --l) {
    const auto& prev = acts[static_cast<std::size_t>(l)];
    const Eigen::Index n_in = prev.size();
    const Eigen::Index n_out = delta.cols();
    const Eigen::Index offset = net.weight_offset(l);
    for (Eigen::Index i = 0; i < n_out; ++i) {
      jac.block(0, offset + i * n_in, outputs, n_in).noalias() = delta.col(i) * prev.transpose();
    }
    jac.block(0, offset + n_out * n_in, outputs, n_out) = delta;
    if (l > 0) {
      Eigen::MatrixXd back = delta * net.weights(l);
      const Eigen::ArrayXd slope = 1.0 - prev.array().square();
      delta = (back.array().rowwise() * slope.transpose()).matrix();
    }
  }
  return jac;
}

namespace {

void check_regression(const Mlp& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                      const Eigen::Ref<const Eigen::VectorXd>& targets) {
  check_input(net, inputs.cols());
  if (net.output_dim() != 1) throw DimensionError("loss_gradient needs a scalar-output network");
  if (targets.size() != inputs.rows()) {
    throw DimensionError("got " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(inputs.rows()) + " inputs");
  }
}

struct ShardResult {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

ShardResult shard_loss_gradient(const Mlp& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                const Eigen::Ref<const Eigen::VectorXd>& targets, const HuberSpec& spec,
                                double inv_count) {
  const auto acts = batch_activations(net, inputs);
  const int layers = net.layer_count();
  const Eigen::VectorXd residual = acts.back().col(0) - targets;

  ShardResult out;
  out.gradient = Eigen::VectorXd::Zero(net.parameter_count());
  Eigen::MatrixXd delta(residual.size(), 1);
  for (Eigen::Index r = 0; r < residual.size(); ++r) {
    out.loss += huber_loss(residual[r], spec);
    delta(r, 0) = huber_derivative(residual[r], spec) * inv_count;
  }
  out.loss *= inv_count;

  for (int l = layers - 1; l >= 0; --l) {
    const auto& prev = acts[static_cast<std::size_t>(l)];
    const Eigen::Index n_in = prev.cols();
    const Eigen::Index n_out = delta.cols();
    const Eigen::Index offset = net.weight_offset(l);
    Eigen::Map<RowMatrix> grad_w(out.gradient.data() + offset, n_out, n_in);
    grad_w.noalias() = delta.transpose() * prev;
    out.gradient.segment(offset + n_out * n_in, n_out) = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd back = delta * net.weights(l);
      delta = (back.array() * (1.0 - prev.array().square())).matrix();
    }
  }
  return out;
}

}  // namespace

LossGradient loss_gradient(const Mlp& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                           const Eigen::Ref<const Eigen::VectorXd>& targets, const HuberSpec& loss,
                           int workers, Eigen::Index shard_rows) {
  check_regression(net, inputs, targets);
  const Eigen::Index rows = inputs.rows();
  LossGradient result;
  result.gradient = Eigen::VectorXd::Zero(net.parameter_count());
  if (rows == 0) return result;

  shard_rows = std::max<Eigen::Index>(1, shard_rows);
  const auto shards = static_cast<std::size_t>((rows + shard_rows - 1) / shard_rows);
  const double inv_count = 1.0 / static_cast<double>(rows);
  std::vector<ShardResult> partial(shards);
  parallel_for(shards, workers, [&](std::size_t s) {
    const Eigen::Index begin = static_cast<Eigen::Index>(s) * shard_rows;
    const Eigen::Index len = std::min(shard_rows, rows - begin);
    partial[s] = shard_loss_gradient(net, inputs.middleRows(begin, len), targets.segment(begin, len), loss,
                                     inv_count);
  });
  for (const auto& p : partial) {
    result.loss += p.loss;
    result.gradient += p.gradient;
  }
  return result;
}

double batch_loss(const Mlp& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                  const Eigen::Ref<const Eigen::VectorXd>& targets, const HuberSpec& loss) {
  check_regression(net, inputs, targets);
  if (inputs.rows() == 0) return 0.0;
  const Eigen::MatrixXd out = batch_forward(net, inputs);
  double total = 0.0;
  for (Eigen::Index r = 0; r < out.rows(); ++r) total += huber_loss(out(r, 0) - targets[r], loss);
  return total / static_cast<double>(inputs.rows());
}

namespace {

constexpr const char* kMagic = "quadrl-mlp";
constexpr int kFormatVersion = 1;

double parse_double(const std::string& token, const std::filesystem::path& path) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || end != token.data() + token.size()) {
    throw DimensionError(path.string() + ": bad parameter value '" + token + "'");
  }
  return v;
}

}  // namespace

void save_mlp(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "layers " << net.layer_sizes().size();
  for (int n : net.layer_sizes()) out << ' ' << n;
  out << '\n' << "params " << net.parameter_count() << '\n';
  for (Eigen::Index i = 0; i < net.parameter_count(); ++i) out << format_double(net.parameters()[i]) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Mlp load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open network file " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kMagic || version != kFormatVersion) {
    throw DimensionError(path.string() + ": not a quadrl-mlp v1 file");
  }
  std::string key;
  std::size_t n_layers = 0;
  in >> key >> n_layers;
  if (key != "layers" || n_layers < 2) throw DimensionError(path.string() + ": bad layers line");
  std::vector<int> sizes(n_layers);
  for (auto& n : sizes) in >> n;
  Eigen::Index count = 0;
  in >> key >> count;
  if (!in || key != "params") throw DimensionError(path.string() + ": bad params line");
  if (count != parameter_count(sizes)) {
    throw DimensionError(path.string() + ": parameter count does not match layer sizes");
  }
  Eigen::VectorXd params(count);
  std::string token;
  for (Eigen::Index i = 0; i < count; ++i) {
    if (!(in >> token)) throw DimensionError(path.string() + ": truncated parameter list");
    params[i] = parse_double(token, path);
  }
  return Mlp(std::move(sizes), std::move(params));
}

}  // namespace quadrl
