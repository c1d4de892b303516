#pragma once

#include "quadrl/mlp.hpp"
#include "quadrl/policy_optimizer.hpp"
#include "quadrl/rollout.hpp"
#include "quadrl/task_env.hpp"
#include "quadrl/value_learner.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace quadrl {

struct TrainConfig {
  TaskConfig task;
  RolloutConfig rollout;
  ValueFitConfig value;
  PolicyOptConfig policy;
  std::vector<int> policy_layers{kObservationDim, 64, 64, kActionDim};
  std::vector<int> value_layers{kObservationDim, 64, 64, 1};
  int iterations = 100;
  int eval_rollouts = 100;
  int eval_length = 600;
  std::uint64_t seed = 1;
  int plateau_patience = 0;  ///< stop after this many iterations without improvement; 0 disables
  double plateau_tolerance = 1e-4;
  int workers = 0;

  /// Copies the fields shared between modules (noise covariance, discount,
  /// worker count) from their owning section into the others.
  TrainConfig resolved() const;
  void validate() const;
};

/// Mean over evaluation rollouts of the discounted cost sum, and of the per-step cost.
struct EvalCost {
  double discounted = 0.0;
  double per_step = 0.0;
  int diverged = 0;
};

/// One learning-curve row. Row 0 is the untrained networks.
struct IterationLog {
  int iteration = 0;
  EvalCost eval;
  double value_loss = 0.0;
  int value_iterations = 0;
  PolicyUpdateStats update;
  IterationStats samples;
};

struct PhaseTimes {
  int iteration = 0;
  double rollout_s = 0.0;
  double value_s = 0.0;
  double policy_s = 0.0;
  double eval_s = 0.0;
};

struct TrainResult {
  Mlp policy;
  Mlp value;
  std::vector<IterationLog> log;
  std::vector<PhaseTimes> times;
  bool plateaued = false;
};

/// Called after every iteration (and for row 0) with the networks at that point.
using IterationCallback = std::function<void(const IterationLog&, const PhaseTimes&, const Mlp& policy, const Mlp& value)>;

Mlp initial_policy(const TrainConfig& config);
Mlp initial_value(const TrainConfig& config);

/// Fixed evaluation start states for a seed, disjoint from the training streams.
std::vector<QuadState> evaluation_starts(const InitDistribution& init, int count, std::uint64_t seed);

EvalCost evaluate_cost(const Mlp& policy, const TaskConfig& task, std::span<const QuadState> starts, int length,
                       int workers);

/// Alternates rollouts, value fitting and one natural-gradient policy update.
TrainResult train(const TrainConfig& config, const IterationCallback& on_iteration = {});

/// Continues from given networks. Iterations first_iteration+1 .. config.iterations
/// are run; row 0 is only evaluated when first_iteration == 0. Every random
/// stream is keyed by (seed, iteration), so a resumed run reproduces an
/// uninterrupted one.
TrainResult train(const TrainConfig& config, Mlp policy, Mlp value, int first_iteration,
                  const IterationCallback& on_iteration = {});

void write_learning_curve_header(std::ostream& out);
void write_learning_curve_row(std::ostream& out, const IterationLog& row);
void write_timing_header(std::ostream& out);
void write_timing_row(std::ostream& out, const PhaseTimes& row);

}  // namespace quadrl
