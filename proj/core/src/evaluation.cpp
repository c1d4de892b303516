#include "quadrl/evaluation.hpp"

#include "quadrl/errors.hpp"
#include "quadrl/natural_gradient.hpp"
#include "quadrl/parallel.hpp"
#include "quadrl/trajectory_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace quadrl {

namespace {

// rollout.cpp uses purposes 1..3, the trainer 10..13.
enum EvalStream : int { kRecoveryStart = 20, kLatencyInput = 21, kSolverProblem = 22 };

using Clock = std::chrono::steady_clock;

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
  return v[std::min(idx, v.size() - 1)];
}

int steps_for(double seconds, double dt) { return std::max(1, static_cast<int>(std::lround(seconds / dt))); }

}  // namespace

void RecoveryConfig::validate() const {
  if (episodes < 0) throw ConfigError("recovery.episodes must be non-negative");
  if (!(duration > 0.0)) throw ConfigError("recovery.duration must be positive");
  if (!std::isfinite(altitude)) throw ConfigError("recovery.altitude must be finite");
}

void WaypointConfig::validate() const {
  if (!(side > 0.0) || !std::isfinite(side)) throw ConfigError("waypoint.side must be positive");
  if (!(dwell > 0.0)) throw ConfigError("waypoint.dwell must be positive");
  if (!(steady_window > 0.0) || steady_window > dwell) {
    throw ConfigError("waypoint.steady_window must be in (0, dwell]");
  }
  if (!std::isfinite(altitude)) throw ConfigError("waypoint.altitude must be finite");
}

void BenchConfig::validate() const {
  if (inference_repetitions < 1) throw ConfigError("bench.inference_repetitions must be positive");
  if (solver_problems < 1) throw ConfigError("bench.solver_problems must be positive");
  if (solver_repetitions < 1) throw ConfigError("bench.solver_repetitions must be positive");
}

Mlp pd_only_policy(const std::vector<int>& layers) {
  Mlp stub(layers);
  check_policy_shape(stub);
  return stub;
}

void check_policy_shape(const Mlp& policy) {
  if (policy.layer_count() < 1 || policy.input_dim() != kObservationDim || policy.output_dim() != kActionDim) {
    throw DimensionError("policy must map 18 observations to 4 actions");
  }
}

std::vector<QuadState> recovery_starts(const TaskConfig& task, const RecoveryConfig& config) {
  InitDistribution dist = task.init;
  dist.center = Vec3::Zero();
  std::vector<QuadState> starts;
  starts.reserve(static_cast<std::size_t>(std::max(config.episodes, 0)));
  for (int i = 0; i < config.episodes; ++i) {
    auto rng = stream_rng(config.seed, 0, kRecoveryStart, i);
    starts.push_back(sample_initial(dist, rng));
  }
  return starts;
}

RecoveryResult run_recovery(const Mlp& policy, const TaskConfig& task, const RecoveryConfig& config, int workers,
                            const std::optional<std::filesystem::path>& csv_dir,
                            std::vector<std::filesystem::path>* written) {
  check_policy_shape(policy);
  config.validate();
  RecoveryResult out;
  out.episodes = config.episodes;
  if (config.episodes == 0) return out;

  const auto starts = recovery_starts(task, config);
  const int steps = steps_for(config.duration, task.quad.dt);
  const auto trajectories = rollout_batch(policy, task, starts, steps, workers);

  if (csv_dir) std::filesystem::create_directories(*csv_dir);
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const Trajectory& t = trajectories[i];
    int hit = -1;
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      if (config.altitude + t.states[k].position.z() <= 0.0) {
        hit = static_cast<int>(k);
        break;
      }
    }
    const bool failed = hit >= 0 || t.diverged;
    out.failed.push_back(failed);
    out.failure_step.push_back(hit);
    out.failures += failed ? 1 : 0;
    out.diverged += t.diverged ? 1 : 0;

    if (csv_dir) {
      char name[32];
      std::snprintf(name, sizeof name, "recovery_%03zu.csv", i);
      const auto path = *csv_dir / name;
      std::vector<TrajectoryRow> rows;
      rows.reserve(t.states.size());
      for (std::size_t k = 0; k < t.states.size(); ++k) {
        TrajectoryRow row;
        row.time = static_cast<double>(k) * task.quad.dt;
        row.state = t.states[k];
        row.state.position.z() += config.altitude;
        if (k < t.actions.size()) row.thrust = act(t.actions[k], t.states[k], task);
        rows.push_back(row);
      }
      write_trajectory_csv(path, rows);
      if (written) written->push_back(path);
    }
  }
  return out;
}

WaypointResult run_waypoint(const Mlp& policy, const TaskConfig& task, const WaypointConfig& config,
                            const std::optional<std::filesystem::path>& csv_path) {
  check_policy_shape(policy);
  config.validate();
  const double s = config.side;
  const Vec3 corners[4] = {Vec3(0, 0, config.altitude), Vec3(s, 0, config.altitude), Vec3(s, s, config.altitude),
                           Vec3(0, s, config.altitude)};
  const int dwell_steps = steps_for(config.dwell, task.quad.dt);
  const int window = std::min(dwell_steps, steps_for(config.steady_window, task.quad.dt));

  QuadState state;
  state.position = corners[0];
  WaypointResult out;
  std::vector<TrajectoryRow> rows;
  double error_sum = 0.0;
  double steady_sum = 0.0;
  long steps = 0;
  long steady_steps = 0;
  // The first dwell starts on its corner; the square is flown once and closed
  // by returning to the first corner.
  for (int leg = 0; leg < 5 && !out.diverged; ++leg) {
    const Vec3& target = corners[leg % 4];
    for (int k = 0; k < dwell_steps; ++k) {
      const double err = (state.position - target).norm();
      error_sum += err;
      ++steps;
      if (leg > 0) out.max_error = std::max(out.max_error, err);
      if (k >= dwell_steps - window) {
        steady_sum += err;
        ++steady_steps;
      }
      const Action a = forward(policy, observe(state, target, task.scales));
      const QuadState before = state;
      Vec4 thrust = Vec4::Zero();
      try {
        thrust = act(a, state, task);
        state = step(state, thrust, task.quad);
      } catch (const DivergenceError&) {
        out.diverged = true;
      }
      if (csv_path) rows.push_back({static_cast<double>(rows.size()) * task.quad.dt, before, thrust});
      if (out.diverged) break;
    }
  }
  out.mean_error = steps > 0 ? error_sum / static_cast<double>(steps) : 0.0;
  out.steady_state_error = steady_steps > 0 ? steady_sum / static_cast<double>(steady_steps) : 0.0;
  if (csv_path) write_trajectory_csv(*csv_path, rows);
  return out;
}

LatencyResult time_inference(const Mlp& policy, int repetitions, std::uint64_t seed) {
  check_policy_shape(policy);
  auto rng = stream_rng(seed, 0, kLatencyInput, 0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Observation obs;
  for (int i = 0; i < kObservationDim; ++i) obs[i] = u(rng);

  std::vector<double> us;
  us.reserve(static_cast<std::size_t>(std::max(repetitions, 0)));
  double sink = 0.0;
  for (int i = 0; i < 1000; ++i) sink += forward(policy, obs)[0];
  for (int i = 0; i < repetitions; ++i) {
    obs[i % kObservationDim] += 1e-9;
    const auto t0 = Clock::now();
    sink += forward(policy, obs)[0];
    us.push_back(std::chrono::duration<double, std::micro>(Clock::now() - t0).count());
  }
  // Keeps the calls observable.
  if (!std::isfinite(sink)) us.push_back(0.0);

  LatencyResult out;
  out.repetitions = repetitions;
  if (us.empty()) return out;
  double total = 0.0;
  for (double v : us) total += v;
  out.mean_us = total / static_cast<double>(us.size());
  out.median_us = percentile(us, 0.5);
  out.p99_us = percentile(us, 0.99);
  return out;
}

SolverBenchResult bench_solvers(int parameters, const Mat4& noise_covariance, int problems, int repetitions,
                                int cg_iterations, std::uint64_t seed) {
  const Mat4 metric = noise_covariance.inverse();
  SolverBenchResult out;
  out.problems = problems;
  out.cg_iterations = cg_iterations;
  std::vector<double> svd_ms;
  std::vector<double> cg_ms;
  for (int p = 0; p < problems; ++p) {
    auto rng = stream_rng(seed, 0, kSolverProblem, p);
    std::normal_distribution<double> n01;
    Eigen::MatrixXd jac(kActionDim, parameters);
    for (Eigen::Index i = 0; i < jac.size(); ++i) jac.data()[i] = n01(rng);
    Eigen::VectorXd ga(kActionDim);
    for (int i = 0; i < kActionDim; ++i) ga[i] = n01(rng);

    NaturalGradientResult svd;
    NaturalGradientResult cg;
    for (int r = 0; r < repetitions; ++r) {
      auto t0 = Clock::now();
      svd = natural_gradient_svd(jac, metric, ga);
      svd_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
      t0 = Clock::now();
      cg = natural_gradient_cg(jac, metric, ga, cg_iterations);
      cg_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    }
    const double gnorm = svd.gradient.norm();
    out.svd_max_residual = std::max(out.svd_max_residual, natural_gradient_residual(jac, metric, svd) / gnorm);
    out.cg_max_residual = std::max(out.cg_max_residual, natural_gradient_residual(jac, metric, cg) / gnorm);
    out.max_disagreement = std::max(
        out.max_disagreement, (svd.natural_gradient - cg.natural_gradient).norm() / svd.natural_gradient.norm());
  }
  out.svd_ms = percentile(svd_ms, 0.5);
  out.cg_ms = percentile(cg_ms, 0.5);
  return out;
}

}  // namespace quadrl
