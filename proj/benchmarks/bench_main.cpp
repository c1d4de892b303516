#include "quadrl/mlp.hpp"
#include "quadrl/natural_gradient.hpp"
#include "quadrl/quad_sim.hpp"
#include "quadrl/so3.hpp"
#include "quadrl/task_env.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace quadrl;

namespace {

Eigen::VectorXd gaussian(Eigen::Index n, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> d(0.0, scale);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Mlp policy_net(std::mt19937_64& rng) {
  Mlp net({18, 64, 64, 4});
  net.set_parameters(gaussian(net.parameter_count(), rng, 0.2));
  return net;
}

Eigen::MatrixXd jacobian_4xp(std::mt19937_64& rng) {
  Eigen::MatrixXd j(4, 5636);
  j.reshaped() = gaussian(j.size(), rng, 1.0);
  return j;
}

void BM_PolicyForward(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const Mlp net = policy_net(rng);
  const Eigen::VectorXd x = gaussian(18, rng, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, x));
}
BENCHMARK(BM_PolicyForward);

void BM_PolicyBatchForward(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Mlp net = policy_net(rng);
  Eigen::MatrixXd xs(state.range(0), 18);
  xs.reshaped() = gaussian(xs.size(), rng, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(batch_forward(net, xs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PolicyBatchForward)->Arg(64)->Arg(512);

void BM_OutputJacobian(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const Mlp net = policy_net(rng);
  const Eigen::VectorXd x = gaussian(18, rng, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(output_jacobian(net, x));
}
BENCHMARK(BM_OutputJacobian);

void BM_NaturalGradientSvd(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd j = jacobian_4xp(rng);
  const Mat4 d = Mat4::Identity() / 0.1089;
  const Eigen::VectorXd ga = gaussian(4, rng, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(natural_gradient_svd(j, d, ga));
}
BENCHMARK(BM_NaturalGradientSvd)->Unit(benchmark::kMicrosecond);

void BM_NaturalGradientCg(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd j = jacobian_4xp(rng);
  const Mat4 d = Mat4::Identity() / 0.1089;
  const Eigen::VectorXd ga = gaussian(4, rng, 1.0);
  const int iterations = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(natural_gradient_cg(j, d, ga, iterations));
}
BENCHMARK(BM_NaturalGradientCg)->Arg(10)->Unit(benchmark::kMicrosecond);

void BM_SimulatorStep(benchmark::State& state) {
  const TaskConfig task;
  QuadState s;
  s.rotation = so3_exp(Vec3(0.3, -0.2, 0.1));
  for (auto _ : state) {
    s = step(s, act(Action::Zero(), s, task), task.quad);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_SimulatorStep);

}  // namespace

BENCHMARK_MAIN();
