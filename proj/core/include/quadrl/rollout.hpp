#pragma once

#include "quadrl/mlp.hpp"
#include "quadrl/task_env.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace quadrl {

enum class TrajectoryKind { initial, junction, branch };

const char* to_string(TrajectoryKind kind);

/// One simulated rollout. states/observations have one more entry than
/// actions/costs; `actions` are in network units and include any exploration noise.
struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::initial;
  int id = 0;            ///< index among trajectories of the same kind
  int parent = -1;       ///< initial id for a junction, junction id for a branch
  int parent_step = -1;  ///< step on the parent where this trajectory starts
  int start_time = 0;    ///< time index of states[0] (initial trajectories start at 0)
  std::vector<QuadState> states;
  std::vector<Observation> observations;
  std::vector<Action> actions;
  std::vector<double> costs;
  bool diverged = false;

  int steps() const { return static_cast<int>(actions.size()); }
  int end_time() const { return start_time + steps(); }
};

/// Gaussian exploration noise added to the policy output on junction steps.
struct NoiseSpec {
  Mat4 covariance = Mat4::Identity() * (0.33 * 0.33);
  int depth = 2;

  /// Throws ConfigError unless the covariance is symmetric positive-definite and depth >= 1.
  void validate() const;
};

struct RolloutConfig {
  int initial_count = 512;
  int initial_length = 600;
  int branch_count = 1024;
  int branch_length = 600;
  NoiseSpec noise;
  int workers = 0;  ///< <= 0: hardware concurrency

  void validate() const;
  /// Step budget when nothing diverges.
  std::int64_t nominal_steps() const {
    return static_cast<std::int64_t>(initial_count) * initial_length +
           static_cast<std::int64_t>(branch_count) * (noise.depth + branch_length);
  }
};

/// Contrast between the on-policy action and a perturbed one at a junction site.
///
/// on_policy_value and next_value are discounted returns of the on-policy
/// continuation from `state` and of the perturbed continuation from the state
/// after the perturbed step. Both are cut at the same time index, the earlier
/// of the two continuations' ends, and bootstrapped there with the value network.
struct JunctionPair {
  Observation state = Observation::Zero();
  Action on_policy_action = Action::Zero();
  Action perturbed_action = Action::Zero();
  double cost = 0.0;
  double next_value = 0.0;
  double on_policy_value = 0.0;
  int initial_id = -1;
  int site_step = -1;
  int junction_id = -1;
};

struct ValueSamples {
  Eigen::MatrixXd observations;  ///< one row per on-policy state
  Eigen::VectorXd targets;
};

struct IterationStats {
  std::int64_t simulated_steps = 0;
  double mean_cost = 0.0;  ///< mean per-step cost over the initial trajectories
  int divergences = 0;
  int pairs = 0;
};

struct IterationSamples {
  ValueSamples on_policy;
  std::vector<JunctionPair> pairs;
  std::vector<Trajectory> initial;
  std::vector<Trajectory> junctions;
  std::vector<Trajectory> branches;
  IterationStats stats;
};

/// Independent generator for (seed, iteration, purpose, index). Streams do not
/// depend on how work is scheduled across lanes.
std::mt19937_64 stream_rng(std::uint64_t seed, int iteration, int purpose, int index);

/// Backward recursion v_i = r_i + gamma v_{i+1}, v_T = terminal_value.
/// Returns one value per cost (states 0..T-1).
std::vector<double> mc_values(std::span<const double> costs, double terminal_value, double gamma);

/// Value network estimate at the last state of a trajectory.
double terminal_value(const Trajectory& traj, const Mlp& value);

std::vector<double> mc_values(const Trajectory& traj, const Mlp& value, double gamma);

/// Runs policy on `starts` in lock-step for `steps` steps and returns one
/// trajectory per start. Observations are relative to the origin. Lanes that
/// diverge stop early and are flagged.
std::vector<Trajectory> rollout_batch(const Mlp& policy, const TaskConfig& task, std::span<const QuadState> starts,
                                      int steps, int workers);

/// Collects one iteration of samples: on-policy initial trajectories from the
/// initial-state distribution, junction trajectories of `noise.depth` noisy
/// steps from sites drawn uniformly over all initial-trajectory steps, and an
/// on-policy branch after each junction.
IterationSamples run_iteration(const Mlp& policy, const Mlp& value, const TaskConfig& task,
                               const RolloutConfig& config, std::uint64_t seed, int iteration);

}  // namespace quadrl
