#pragma once

#include "quadrl/mlp.hpp"
#include "quadrl/policy_optimizer.hpp"
#include "quadrl/rollout.hpp"
#include "quadrl/task_env.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace quadrl {

/// Recovery test: random states around a hover point `altitude` metres above
/// a ground plane at z = 0. Only evaluation has a ground.
struct RecoveryConfig {
  int episodes = 100;
  double altitude = 2.0;  ///< m
  double duration = 5.0;  ///< s
  std::uint64_t seed = 1;

  void validate() const;
};

/// Visits the corners of a square (side x side, at the hover altitude) in order.
struct WaypointConfig {
  double side = 1.0;          ///< m
  double dwell = 4.0;         ///< s per corner
  double steady_window = 1.0; ///< trailing part of each dwell used for steady-state error, s
  double altitude = 2.0;      ///< m

  void validate() const;
};

struct BenchConfig {
  int inference_repetitions = 100000;
  int solver_problems = 20;
  int solver_repetitions = 5;
  std::uint64_t seed = 1;

  void validate() const;
};

struct RecoveryResult {
  int episodes = 0;
  int failures = 0;
  int diverged = 0;
  std::vector<bool> failed;         ///< per episode
  std::vector<int> failure_step;    ///< first step at or below the ground, -1 if none
  double failure_rate() const { return episodes > 0 ? static_cast<double>(failures) / episodes : 0.0; }
};

struct WaypointResult {
  double mean_error = 0.0;          ///< m, over every step
  double max_error = 0.0;           ///< m, after the first corner is reached
  double steady_state_error = 0.0;  ///< m, mean over the trailing window of every dwell
  bool diverged = false;
};

struct LatencyResult {
  int repetitions = 0;
  double median_us = 0.0;
  double p99_us = 0.0;
  double mean_us = 0.0;
};

struct SolverBenchResult {
  int problems = 0;
  int cg_iterations = 0;
  double svd_ms = 0.0;             ///< median per solve
  double cg_ms = 0.0;
  double svd_max_residual = 0.0;   ///< max |H n - g| / |g|
  double cg_max_residual = 0.0;
  double max_disagreement = 0.0;   ///< max |n_svd - n_cg| / |n_svd|
};

struct EvalReport {
  std::optional<RecoveryResult> recovery;
  std::optional<WaypointResult> waypoint;
  std::optional<LatencyResult> latency;
  std::vector<std::filesystem::path> trajectory_csvs;
};

/// The untrained policy: zero output, so the command is hover bias plus PD.
Mlp pd_only_policy(const std::vector<int>& layers);

/// Throws DimensionError unless the network maps 18 observations to 4 actions.
void check_policy_shape(const Mlp& policy);

/// Start states relative to the hover point; identical for every altitude.
std::vector<QuadState> recovery_starts(const TaskConfig& task, const RecoveryConfig& config);

/// Flies every episode relative to the hover point. An episode fails when the
/// absolute altitude reaches zero at any step or the simulation diverges, so a
/// lower start altitude can only add failures. Writes one CSV per episode to
/// `csv_dir` when given (absolute coordinates).
RecoveryResult run_recovery(const Mlp& policy, const TaskConfig& task, const RecoveryConfig& config,
                            int workers, const std::optional<std::filesystem::path>& csv_dir = std::nullopt,
                            std::vector<std::filesystem::path>* written = nullptr);

/// Starts hovering at the origin corner and steps the target through the four
/// corners. The policy sees the position relative to the active corner.
WaypointResult run_waypoint(const Mlp& policy, const TaskConfig& task, const WaypointConfig& config,
                            const std::optional<std::filesystem::path>& csv_path = std::nullopt);

/// Single-observation forward passes on the calling thread.
LatencyResult time_inference(const Mlp& policy, int repetitions, std::uint64_t seed);

/// Natural-gradient solves on random 4 x P Jacobians with D = inverse noise covariance.
SolverBenchResult bench_solvers(int parameters, const Mat4& noise_covariance, int problems, int repetitions,
                                int cg_iterations, std::uint64_t seed);

}  // namespace quadrl
