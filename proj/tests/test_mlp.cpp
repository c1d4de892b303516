#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "quadrl/errors.hpp"
#include "quadrl/mlp.hpp"
#include "support/oracles.hpp"

using namespace quadrl;
using quadrl::testing::fd_gradient;
using quadrl::testing::fd_jacobian;
using quadrl::testing::loop_forward;
using quadrl::testing::max_relative_error;
using quadrl::testing::random_mlp;
using quadrl::testing::random_vector;

TEST(MlpShape, PolicyAndValueParameterCounts) {
  EXPECT_EQ(Mlp({18, 64, 64, 4}).parameter_count(), 5636);
  EXPECT_EQ(Mlp({18, 64, 64, 1}).parameter_count(), 5441);
  const std::vector<int> layout{18, 64, 64, 4};
  EXPECT_EQ(parameter_count(layout), 5636);
}

TEST(MlpShape, FlattenRoundTrip) {
  std::mt19937_64 rng(3);
  Mlp net({5, 7, 3});
  const Eigen::VectorXd v = random_vector(net.parameter_count(), rng);
  net.set_parameters(v);
  EXPECT_EQ(net.parameters(), v);
  // Views into the flat vector see the same numbers.
  EXPECT_EQ(net.weights(0)(1, 2), v[1 * 5 + 2]);
  EXPECT_EQ(net.bias(0)[4], v[7 * 5 + 4]);
  EXPECT_EQ(net.weights(1)(2, 6), v[net.weight_offset(1) + 2 * 7 + 6]);
}

TEST(MlpShape, RejectsWrongSizes) {
  Mlp net({3, 2});
  EXPECT_THROW(net.set_parameters(Eigen::VectorXd::Zero(3)), DimensionError);
  EXPECT_THROW(forward(net, Eigen::VectorXd::Zero(4)), DimensionError);
  EXPECT_THROW(batch_forward(net, Eigen::MatrixXd::Zero(2, 2)), DimensionError);
  EXPECT_THROW(output_jacobian(net, Eigen::VectorXd::Zero(2)), DimensionError);
  EXPECT_THROW(Mlp({3}), DimensionError);
  EXPECT_THROW(Mlp({3, 0, 1}), DimensionError);
}

TEST(Forward, ZeroNetworkGivesZero) {
  Mlp net({18, 64, 64, 4});
  std::mt19937_64 rng(1);
  EXPECT_EQ(forward(net, random_vector(18, rng)), Eigen::VectorXd::Zero(4));
}

TEST(Forward, SingleAffineLayer) {
  Mlp net({2, 1}, (Eigen::VectorXd(3) << 1, 1, 0).finished());
  EXPECT_DOUBLE_EQ(forward(net, Eigen::Vector2d(3, 4))[0], 7.0);
}

TEST(Forward, MatchesLoopOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Mlp net = random_mlp({18, 64, 64, 4}, rng, 0.3);
    const Eigen::VectorXd x = random_vector(18, rng);
    EXPECT_LE((forward(net, x) - loop_forward(net, x)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Forward, IsDeterministic) {
  std::mt19937_64 rng(2);
  const Mlp net = random_mlp({18, 64, 64, 4}, rng);
  const Eigen::VectorXd x = random_vector(18, rng);
  EXPECT_EQ(forward(net, x), forward(net, x));
}

TEST(Forward, OutputLayerIsAffine) {
  std::mt19937_64 rng(5);
  Mlp net = random_mlp({6, 8, 8, 3}, rng);
  const Eigen::VectorXd x = random_vector(6, rng);
  const Eigen::VectorXd y = forward(net, x);
  const int last = net.layer_count() - 1;
  net.weights(last) *= 2.0;
  net.bias(last) *= 2.0;
  EXPECT_LE((forward(net, x) - 2.0 * y).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(BatchForward, MatchesRowwiseForward) {
  std::mt19937_64 rng(7);
  const Mlp net = random_mlp({18, 64, 64, 4}, rng, 0.3);
  Eigen::MatrixXd xs(128, 18);
  for (int i = 0; i < 128; ++i) xs.row(i) = random_vector(18, rng).transpose();
  const Eigen::MatrixXd ys = batch_forward(net, xs);
  ASSERT_EQ(ys.rows(), 128);
  ASSERT_EQ(ys.cols(), 4);
  for (int i = 0; i < 128; ++i) EXPECT_LE((ys.row(i).transpose() - forward(net, xs.row(i).transpose())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BatchForward, BatchOfOneAndRepeatedRows) {
  std::mt19937_64 rng(8);
  const Mlp net = random_mlp({4, 5, 2}, rng);
  const Eigen::VectorXd x = random_vector(4, rng);
  Eigen::MatrixXd one = x.transpose();
  EXPECT_LE((batch_forward(net, one).row(0).transpose() - forward(net, x)).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::MatrixXd two(2, 4);
  two << x.transpose(), x.transpose();
  const Eigen::MatrixXd y = batch_forward(net, two);
  EXPECT_EQ(y.row(0), y.row(1));
}

TEST(OutputJacobian, PolicyShape) {
  std::mt19937_64 rng(1);
  const Mlp net = random_mlp({18, 64, 64, 4}, rng);
  const Eigen::MatrixXd j = output_jacobian(net, random_vector(18, rng));
  EXPECT_EQ(j.rows(), 4);
  EXPECT_EQ(j.cols(), 5636);
}

TEST(OutputJacobian, ZeroNetworkOnlyOutputBiasColumns) {
  Mlp net({18, 64, 64, 4});
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd j = output_jacobian(net, random_vector(18, rng));
  const Eigen::Index bias_start = net.parameter_count() - 4;
  EXPECT_EQ(j.rightCols(4), Eigen::MatrixXd::Identity(4, 4));
  EXPECT_EQ(j.leftCols(bias_start).cwiseAbs().maxCoeff(), 0.0);
}

TEST(OutputJacobian, SmallNetMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Mlp net = random_mlp({3, 5, 2}, rng, 0.8);
    const Eigen::VectorXd x = random_vector(3, rng);
    EXPECT_LE(max_relative_error(output_jacobian(net, x), fd_jacobian(net, x), 1e-4), 1e-5);
  }
}

TEST(OutputJacobian, PolicyNetMatchesFiniteDifferences) {
  std::mt19937_64 rng(22);
  const Mlp net = random_mlp({18, 64, 64, 4}, rng, 0.2);
  const Eigen::VectorXd x = random_vector(18, rng);
  EXPECT_LE(max_relative_error(output_jacobian(net, x), fd_jacobian(net, x), 1e-4), 1e-5);
}

TEST(Huber, QuadraticAndLinearRegimes) {
  const HuberSpec h{1.0};
  EXPECT_DOUBLE_EQ(huber_loss(0.5, h), 0.125);
  EXPECT_DOUBLE_EQ(huber_loss(3.0, h), 2.5);
  EXPECT_DOUBLE_EQ(huber_loss(-3.0, h), 2.5);
  EXPECT_DOUBLE_EQ(huber_derivative(0.5, h), 0.5);
  EXPECT_DOUBLE_EQ(huber_derivative(-3.0, h), -1.0);
}

TEST(Huber, ContinuousAndSmoothAtKnee) {
  const HuberSpec h{0.7};
  for (double sign : {-1.0, 1.0}) {
    const double knee = sign * h.delta;
    const double eps = 1e-9;
    EXPECT_NEAR(huber_loss(knee - eps, h), huber_loss(knee + eps, h), 1e-8);
    EXPECT_NEAR(huber_derivative(knee - eps, h), huber_derivative(knee + eps, h), 1e-8);
    EXPECT_DOUBLE_EQ(huber_loss(knee, h), 0.5 * h.delta * h.delta);
  }
}

TEST(LossGradient, ZeroAtExactFit) {
  std::mt19937_64 rng(9);
  const Mlp net = random_mlp({5, 6, 1}, rng);
  Eigen::MatrixXd xs(10, 5);
  for (int i = 0; i < 10; ++i) xs.row(i) = random_vector(5, rng).transpose();
  const Eigen::VectorXd targets = batch_forward(net, xs).col(0);
  const auto lg = loss_gradient(net, xs, targets, HuberSpec{});
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_EQ(lg.gradient.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LossGradient, SingleSampleQuadraticRegime) {
  std::mt19937_64 rng(10);
  const Mlp net = random_mlp({3, 4, 1}, rng);
  Eigen::MatrixXd x = random_vector(3, rng).transpose();
  const double y = forward(net, x.row(0).transpose())[0];
  const Eigen::VectorXd target = Eigen::VectorXd::Constant(1, y - 0.5);
  const auto lg = loss_gradient(net, x, target, HuberSpec{1.0});
  EXPECT_NEAR(lg.loss, 0.125, 1e-15);
  // Squared-loss gradient: residual * d output / d theta.
  const Eigen::VectorXd expected = 0.5 * output_jacobian(net, x.row(0).transpose()).row(0).transpose();
  EXPECT_LE((lg.gradient - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LossGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const Mlp net = random_mlp({6, 8, 8, 1}, rng, 0.7);
    Eigen::MatrixXd xs(16, 6);
    for (int i = 0; i < 16; ++i) xs.row(i) = random_vector(6, rng).transpose();
    // Mix of residuals on both sides of the knee.
    const Eigen::VectorXd targets = random_vector(16, rng, 2.0);
    const HuberSpec h{1.0};
    const auto lg = loss_gradient(net, xs, targets, h);
    const auto f = [&](const Eigen::VectorXd& theta) { return batch_loss(Mlp(net.layer_sizes(), theta), xs, targets, h); };
    EXPECT_LE(max_relative_error(lg.gradient, fd_gradient(f, net.parameters()), 1e-4), 1e-5);
  }
}

TEST(LossGradient, WorkerCountDoesNotChangeResult) {
  std::mt19937_64 rng(13);
  const Mlp net = random_mlp({18, 16, 1}, rng);
  Eigen::MatrixXd xs(1000, 18);
  for (int i = 0; i < 1000; ++i) xs.row(i) = random_vector(18, rng).transpose();
  const Eigen::VectorXd t = random_vector(1000, rng);
  const auto a = loss_gradient(net, xs, t, HuberSpec{}, 1, 128);
  const auto b = loss_gradient(net, xs, t, HuberSpec{}, 3, 128);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.gradient, b.gradient);
}

TEST(LossGradient, RejectsVectorOutput) {
  Mlp net({2, 2});
  EXPECT_THROW(loss_gradient(net, Eigen::MatrixXd::Zero(1, 2), Eigen::VectorXd::Zero(1), HuberSpec{}), DimensionError);
  Mlp scalar({2, 1});
  EXPECT_THROW(loss_gradient(scalar, Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(3), HuberSpec{}), DimensionError);
}

TEST(MlpFile, SaveLoadIsBitExact) {
  std::mt19937_64 rng(14);
  const Mlp net = random_mlp({18, 64, 64, 4}, rng);
  const auto path = std::filesystem::temp_directory_path() / "quadrl_test_mlp.txt";
  save_mlp(net, path);
  const Mlp back = load_mlp(path);
  EXPECT_TRUE(back == net);
  std::filesystem::remove(path);
}

TEST(MlpFile, MissingFileThrows) {
  EXPECT_THROW(load_mlp("/nonexistent/quadrl/policy.mlp"), std::runtime_error);
}
