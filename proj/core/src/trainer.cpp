#include "quadrl/trainer.hpp"

#include "quadrl/errors.hpp"
#include "quadrl/parallel.hpp"
#include "quadrl/trajectory_io.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

namespace quadrl {

namespace {

// Stream purposes reserved by the trainer; rollout.cpp uses 1..3.
enum TrainerStream : int { kPolicyInit = 10, kValueInit = 11, kEvaluation = 12, kSubsample = 13 };

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

TrainConfig TrainConfig::resolved() const {
  TrainConfig c = *this;
  c.policy.noise_covariance = c.rollout.noise.covariance;
  c.policy.discount = c.task.cost.discount;
  c.rollout.workers = c.workers;
  c.value.workers = c.workers;
  c.policy.workers = c.workers;
  return c;
}

void TrainConfig::validate() const {
  task.validate();
  rollout.validate();
  value.validate();
  policy.validate();
  if (policy_layers.size() < 2 || policy_layers.front() != kObservationDim || policy_layers.back() != kActionDim) {
    throw ConfigError("network.policy_hidden: policy must map 18 inputs to 4 outputs");
  }
  if (value_layers.size() < 2 || value_layers.front() != kObservationDim || value_layers.back() != 1) {
    throw ConfigError("network.value_hidden: value network must map 18 inputs to 1 output");
  }
  if (iterations < 0) throw ConfigError("train.iterations must be non-negative");
  if (eval_rollouts < 0 || eval_length < 1) throw ConfigError("train.eval_rollouts/eval_length out of range");
  if (plateau_patience < 0) throw ConfigError("train.plateau_patience must be non-negative");
}

Mlp initial_policy(const TrainConfig& config) {
  auto rng = stream_rng(config.seed, 0, kPolicyInit, 0);
  return Mlp::initialized(config.policy_layers, rng);
}

Mlp initial_value(const TrainConfig& config) {
  auto rng = stream_rng(config.seed, 0, kValueInit, 0);
  return Mlp::initialized(config.value_layers, rng);
}

std::vector<QuadState> evaluation_starts(const InitDistribution& init, int count, std::uint64_t seed) {
  std::vector<QuadState> starts;
  starts.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    auto rng = stream_rng(seed, 0, kEvaluation, i);
    starts.push_back(sample_initial(init, rng));
  }
  return starts;
}

EvalCost evaluate_cost(const Mlp& policy, const TaskConfig& task, std::span<const QuadState> starts, int length,
                       int workers) {
  EvalCost out;
  if (starts.empty()) return out;
  const auto trajectories = rollout_batch(policy, task, starts, length, workers);
  std::int64_t steps = 0;
  double total = 0.0;
  for (const auto& t : trajectories) {
    double discounted = 0.0;
    double weight = 1.0;
    for (double c : t.costs) {
      discounted += weight * c;
      weight *= task.cost.discount;
      total += c;
    }
    out.discounted += discounted;
    steps += t.steps();
    out.diverged += t.diverged ? 1 : 0;
  }
  out.discounted /= static_cast<double>(trajectories.size());
  out.per_step = steps > 0 ? total / static_cast<double>(steps) : 0.0;
  return out;
}

TrainResult train(const TrainConfig& config, const IterationCallback& on_iteration) {
  return train(config, initial_policy(config), initial_value(config), 0, on_iteration);
}

TrainResult train(const TrainConfig& raw_config, Mlp policy, Mlp value, int first_iteration,
                  const IterationCallback& on_iteration) {
  const TrainConfig config = raw_config.resolved();
  config.validate();
  if (policy.layer_sizes() != config.policy_layers) throw DimensionError("policy network does not match config");
  if (value.layer_sizes() != config.value_layers) throw DimensionError("value network does not match config");

  const int workers = resolve_workers(config.workers);
  const auto starts = evaluation_starts(config.task.init, config.eval_rollouts, config.seed);

  TrainResult result{std::move(policy), std::move(value), {}, {}, false};
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;

  auto record = [&](IterationLog row, PhaseTimes times) {
    result.log.push_back(row);
    result.times.push_back(times);
    if (on_iteration) on_iteration(row, times, result.policy, result.value);
  };

  if (first_iteration == 0) {
    const auto t0 = Clock::now();
    IterationLog row;
    row.eval = evaluate_cost(result.policy, config.task, starts, config.eval_length, workers);
    record(row, PhaseTimes{0, 0.0, 0.0, 0.0, seconds_since(t0)});
    best = row.eval.discounted;
  }

  for (int j = first_iteration + 1; j <= config.iterations; ++j) {
    IterationLog row;
    PhaseTimes times;
    row.iteration = times.iteration = j;

    auto t0 = Clock::now();
    const IterationSamples samples = run_iteration(result.policy, result.value, config.task, config.rollout,
                                                   config.seed, j);
    row.samples = samples.stats;
    times.rollout_s = seconds_since(t0);

    t0 = Clock::now();
    if (samples.on_policy.targets.size() > 0) {
      const auto subsample_rng_seed = stream_rng(config.seed, j, kSubsample, 0)();
      ValueFitResult fit = fit_value(result.value, samples.on_policy.observations, samples.on_policy.targets,
                                     config.value, subsample_rng_seed);
      result.value = std::move(fit.value);
      row.value_loss = fit.final_loss;
      row.value_iterations = fit.iterations;
    }
    times.value_s = seconds_since(t0);

    t0 = Clock::now();
    if (!samples.pairs.empty()) {
      try {
        PolicyUpdate update = update_policy(result.policy, samples.pairs, config.policy);
        result.policy = std::move(update.policy);
        row.update = update.stats;
      } catch (const NoUpdateError&) {
        // Every pair was degenerate; keep the policy and record it.
        row.update.filtered_pairs = static_cast<int>(samples.pairs.size());
      }
    }
    times.policy_s = seconds_since(t0);

    t0 = Clock::now();
    row.eval = evaluate_cost(result.policy, config.task, starts, config.eval_length, workers);
    times.eval_s = seconds_since(t0);
    record(row, times);

    if (row.eval.discounted < best - config.plateau_tolerance) {
      best = row.eval.discounted;
      since_best = 0;
    } else if (config.plateau_patience > 0 && ++since_best >= config.plateau_patience) {
      result.plateaued = true;
      break;
    }
  }
  return result;
}

void write_learning_curve_header(std::ostream& out) {
  out << "iteration,eval_cost,eval_step_cost,eval_diverged,value_loss,value_iterations,applied_step,"
         "max_mahalanobis_sq,mean_advantage,used_pairs,filtered_pairs,rank_deficient,simulated_steps,"
         "rollout_mean_cost,divergences\n";
}

void write_learning_curve_row(std::ostream& out, const IterationLog& row) {
  out << row.iteration << ',' << format_double(row.eval.discounted) << ',' << format_double(row.eval.per_step) << ','
      << row.eval.diverged << ',' << format_double(row.value_loss) << ',' << row.value_iterations << ','
      << format_double(row.update.applied_step) << ',' << format_double(row.update.max_mahalanobis_sq) << ','
      << format_double(row.update.mean_advantage) << ',' << row.update.used_pairs << ','
      << row.update.filtered_pairs << ',' << row.update.rank_deficient << ',' << row.samples.simulated_steps << ','
      << format_double(row.samples.mean_cost) << ',' << row.samples.divergences << '\n';
}

void write_timing_header(std::ostream& out) { out << "iteration,rollout_s,value_s,policy_s,eval_s\n"; }

void write_timing_row(std::ostream& out, const PhaseTimes& row) {
  out << row.iteration << ',' << row.rollout_s << ',' << row.value_s << ',' << row.policy_s << ',' << row.eval_s
      << '\n';
}

}  // namespace quadrl
