#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

namespace quadrl {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Huber loss parameters. Quadratic for |r| <= delta, linear beyond.
struct HuberSpec {
  double delta = 1.0;
};

double huber_loss(double residual, const HuberSpec& spec);
double huber_derivative(double residual, const HuberSpec& spec);

/// Total number of weights and biases for a layer layout.
Eigen::Index parameter_count(std::span<const int> layer_sizes);

/// Dense feedforward network: tanh on hidden layers, affine output layer.
///
/// All parameters live in one flat vector. Layout is layer-major; within a
/// layer the weight matrix (rows = outputs, row-major) comes first, followed
/// by the bias. This vector is the canonical parameter ordering used by
/// output_jacobian, loss_gradient and the on-disk format.
class Mlp {
 public:
  using WeightMap = Eigen::Map<RowMatrix>;
  using ConstWeightMap = Eigen::Map<const RowMatrix>;
  using BiasMap = Eigen::Map<Eigen::VectorXd>;
  using ConstBiasMap = Eigen::Map<const Eigen::VectorXd>;

  Mlp() = default;
  /// All-zero parameters.
  explicit Mlp(std::vector<int> layer_sizes);
  Mlp(std::vector<int> layer_sizes, Eigen::VectorXd parameters);

  /// Hidden weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], all biases
  /// and the output layer zero, so the fresh network outputs exactly zero.
  static Mlp initialized(std::vector<int> layer_sizes, std::mt19937_64& rng);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  /// Number of affine layers (one less than the number of layer sizes).
  int layer_count() const { return static_cast<int>(sizes_.size()) - 1; }
  Eigen::Index parameter_count() const { return params_.size(); }

  const Eigen::VectorXd& parameters() const { return params_; }
  void set_parameters(const Eigen::VectorXd& parameters);

  ConstWeightMap weights(int layer) const;
  WeightMap weights(int layer);
  ConstBiasMap bias(int layer) const;
  BiasMap bias(int layer);

  /// Offset of a layer's weight block inside the parameter vector; its bias
  /// block starts at weight_offset + n_out * n_in.
  Eigen::Index weight_offset(int layer) const { return offsets_[static_cast<std::size_t>(layer)]; }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    return a.sizes_ == b.sizes_ && a.params_ == b.params_;
  }

 private:
  void build_offsets();

  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  Eigen::VectorXd params_;
};

Eigen::VectorXd forward(const Mlp& net, const Eigen::Ref<const Eigen::VectorXd>& input);

/// Row i of the result is forward(net, inputs.row(i)).
Eigen::MatrixXd batch_forward(const Mlp& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs);

/// d output / d parameters, shape output_dim x parameter_count.
Eigen::MatrixXd output_jacobian(const Mlp& net, const Eigen::Ref<const Eigen::VectorXd>& input);

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

/// Mean Huber loss of a scalar-output network over the rows of `inputs`, and
/// its gradient. Rows are processed in fixed shards of `shard_rows` and the
/// shard sums are added in shard order, so the result does not depend on
/// `workers`.
LossGradient loss_gradient(const Mlp& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                           const Eigen::Ref<const Eigen::VectorXd>& targets, const HuberSpec& loss,
                           int workers = 1, Eigen::Index shard_rows = 2048);

double batch_loss(const Mlp& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                  const Eigen::Ref<const Eigen::VectorXd>& targets, const HuberSpec& loss);

// Text format, one token per line after the header:
//
//   quadrl-mlp 1
//   layers <L+1> <n_0> ... <n_L>
//   params <count>
//   <value>            (count lines, shortest round-trip decimal)
//
// Values are written with std::to_chars, so save/load is bit-exact.
void save_mlp(const Mlp& net, const std::filesystem::path& path);
Mlp load_mlp(const std::filesystem::path& path);

}  // namespace quadrl
