#include "quadrl/rollout.hpp"

#include "quadrl/errors.hpp"
#include "quadrl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace quadrl {

const char* to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::initial: return "initial";
    case TrajectoryKind::junction: return "junction";
    case TrajectoryKind::branch: return "branch";
  }
  return "unknown";
}

void NoiseSpec::validate() const {
  if (depth < 1) throw ConfigError("noise.depth must be at least 1");
  if (!covariance.allFinite() || !covariance.isApprox(covariance.transpose(), 1e-12)) {
    throw ConfigError("noise covariance must be symmetric");
  }
  Eigen::LLT<Mat4> llt(covariance);
  if (llt.info() != Eigen::Success) throw ConfigError("noise covariance must be positive-definite");
}

void RolloutConfig::validate() const {
  if (initial_count < 0 || branch_count < 0) throw ConfigError("trajectory counts must be non-negative");
  if (initial_length < 1 || branch_length < 0) throw ConfigError("trajectory lengths out of range");
  noise.validate();
}

std::mt19937_64 stream_rng(std::uint64_t seed, int iteration, int purpose, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(purpose),
                    static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

std::vector<double> mc_values(std::span<const double> costs, double terminal_value, double gamma) {
  std::vector<double> values(costs.size());
  double next = terminal_value;
  for (std::size_t i = costs.size(); i-- > 0;) {
    next = costs[i] + gamma * next;
    values[i] = next;
  }
  return values;
}

double terminal_value(const Trajectory& traj, const Mlp& value) {
  return forward(value, traj.observations.back())[0];
}

std::vector<double> mc_values(const Trajectory& traj, const Mlp& value, double gamma) {
  return mc_values(traj.costs, terminal_value(traj, value), gamma);
}

namespace {

enum StreamPurpose : int { kInitialStates = 1, kJunctionSites = 2, kJunctionNoise = 3 };

constexpr Eigen::Index kEvalChunk = 256;

Eigen::MatrixXd chunked_forward(const Mlp& net, const Eigen::MatrixXd& inputs, int workers) {
  Eigen::MatrixXd out(inputs.rows(), net.output_dim());
  const auto chunks = static_cast<std::size_t>((inputs.rows() + kEvalChunk - 1) / kEvalChunk);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kEvalChunk;
    const Eigen::Index len = std::min(kEvalChunk, inputs.rows() - begin);
    out.middleRows(begin, len) = batch_forward(net, inputs.middleRows(begin, len));
  });
  return out;
}

// Chooses the action actually applied by lane `lane` on its `step`-th step
// given the policy output for its current state.
using ActionRule = std::function<Action(std::size_t lane, int step, const Action& policy_action)>;

Trajectory start_trajectory(TrajectoryKind kind, int id, const QuadState& start, const TaskConfig& task) {
  Trajectory t;
  t.kind = kind;
  t.id = id;
  t.states.push_back(start);
  t.observations.push_back(observe(start, Vec3::Zero(), task.scales));
  return t;
}

void advance(const Mlp& policy, const TaskConfig& task, std::vector<Trajectory>& lanes, int steps, int workers,
             const ActionRule& rule) {
  std::vector<std::size_t> active;
  Eigen::MatrixXd obs;
  for (int step = 0; step < steps; ++step) {
    active.clear();
    for (std::size_t l = 0; l < lanes.size(); ++l) {
      if (!lanes[l].diverged) active.push_back(l);
    }
    if (active.empty()) return;

    obs.resize(static_cast<Eigen::Index>(active.size()), kObservationDim);
    for (std::size_t j = 0; j < active.size(); ++j) {
      obs.row(static_cast<Eigen::Index>(j)) = lanes[active[j]].observations.back().transpose();
    }
    const Eigen::MatrixXd out = chunked_forward(policy, obs, workers);

    parallel_for(active.size(), workers, [&](std::size_t j) {
      Trajectory& traj = lanes[active[j]];
      const QuadState& s = traj.states.back();
      const Action a = rule(active[j], step, out.row(static_cast<Eigen::Index>(j)).transpose());
      QuadState next;
      Vec4 thrust;
      try {
        thrust = act(a, s, task);
        next = quadrl::step(s, thrust, task.quad);
      } catch (const DivergenceError&) {
        traj.diverged = true;
        return;
      }
      traj.costs.push_back(step_cost(s, thrust, task));
      traj.actions.push_back(a);
      traj.states.push_back(next);
      traj.observations.push_back(observe(next, Vec3::Zero(), task.scales));
    });
  }
}

// The perturbed continuation of junction j: junction steps, then its branch.
struct Continuation {
  const Trajectory& junction;
  const Trajectory& branch;

  int end_time() const { return junction.end_time() + branch.steps(); }
  double cost_at(int t) const {
    return t < junction.end_time() ? junction.costs[static_cast<std::size_t>(t - junction.start_time)]
                                   : branch.costs[static_cast<std::size_t>(t - branch.start_time)];
  }
  const Observation& observation_at(int t) const {
    return t <= junction.end_time() ? junction.observations[static_cast<std::size_t>(t - junction.start_time)]
                                    : branch.observations[static_cast<std::size_t>(t - branch.start_time)];
  }
};

}  // namespace

std::vector<Trajectory> rollout_batch(const Mlp& policy, const TaskConfig& task, std::span<const QuadState> starts,
                                      int steps, int workers) {
  std::vector<Trajectory> lanes;
  lanes.reserve(starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) {
    lanes.push_back(start_trajectory(TrajectoryKind::initial, static_cast<int>(i), starts[i], task));
  }
  advance(policy, task, lanes, steps, resolve_workers(workers),
          [](std::size_t, int, const Action& a) { return a; });
  return lanes;
}

IterationSamples run_iteration(const Mlp& policy, const Mlp& value, const TaskConfig& task,
                               const RolloutConfig& config, std::uint64_t seed, int iteration) {
  if (policy.input_dim() != kObservationDim || policy.output_dim() != kActionDim) {
    throw DimensionError("policy network must map 18 observations to 4 actions");
  }
  if (value.input_dim() != kObservationDim || value.output_dim() != 1) {
    throw DimensionError("value network must map 18 observations to a scalar");
  }
  config.validate();
  const int workers = resolve_workers(config.workers);
  const double gamma = task.cost.discount;

  IterationSamples out;

  // Initial trajectories.
  std::vector<QuadState> starts;
  starts.reserve(static_cast<std::size_t>(config.initial_count));
  for (int i = 0; i < config.initial_count; ++i) {
    auto rng = stream_rng(seed, iteration, kInitialStates, i);
    starts.push_back(sample_initial(task.init, rng));
  }
  out.initial = rollout_batch(policy, task, starts, config.initial_length, workers);

  // Junction sites, uniform over every (initial trajectory, step) with an action.
  std::vector<std::int64_t> prefix(out.initial.size() + 1, 0);
  for (std::size_t i = 0; i < out.initial.size(); ++i) prefix[i + 1] = prefix[i] + out.initial[i].steps();
  const std::int64_t positions = prefix.back();

  const int depth = config.noise.depth;
  const Mat4 noise_factor = config.noise.covariance.llt().matrixL();
  const int junction_count = positions > 0 ? config.branch_count : 0;
  std::vector<std::vector<Action>> noise(static_cast<std::size_t>(junction_count));
  {
    auto site_rng = stream_rng(seed, iteration, kJunctionSites, 0);
    std::uniform_int_distribution<std::int64_t> pick(0, std::max<std::int64_t>(positions - 1, 0));
    for (int b = 0; b < junction_count; ++b) {
      const std::int64_t u = pick(site_rng);
      const auto it = std::upper_bound(prefix.begin(), prefix.end(), u) - 1;
      const auto parent = static_cast<int>(it - prefix.begin());
      const auto k = static_cast<int>(u - *it);
      Trajectory j = start_trajectory(TrajectoryKind::junction, b,
                                      out.initial[static_cast<std::size_t>(parent)].states[static_cast<std::size_t>(k)],
                                      task);
      j.parent = parent;
      j.parent_step = k;
      j.start_time = k;
      out.junctions.push_back(std::move(j));

      auto noise_rng = stream_rng(seed, iteration, kJunctionNoise, b);
      std::normal_distribution<double> normal(0.0, 1.0);
      auto& lane_noise = noise[static_cast<std::size_t>(b)];
      for (int d = 0; d < depth; ++d) {
        Action delta = Action::Zero();
        // A zero perturbation gives no gradient information; redraw.
        for (int attempt = 0; attempt < 64 && delta.norm() < 1e-12; ++attempt) {
          Action z;
          for (int c = 0; c < kActionDim; ++c) z[c] = normal(noise_rng);
          delta = noise_factor * z;
        }
        lane_noise.push_back(delta);
      }
    }
  }

  advance(policy, task, out.junctions, depth, workers, [&](std::size_t lane, int step, const Action& a) -> Action {
    const Trajectory& j = out.junctions[lane];
    // The first perturbation is applied to the action the initial trajectory actually took.
    const Action base = step == 0 ? out.initial[static_cast<std::size_t>(j.parent)]
                                        .actions[static_cast<std::size_t>(j.parent_step)]
                                  : a;
    return base + noise[lane][static_cast<std::size_t>(step)];
  });

  for (const auto& j : out.junctions) {
    Trajectory b = start_trajectory(TrajectoryKind::branch, j.id, j.states.back(), task);
    b.parent = j.id;
    b.parent_step = j.steps();
    b.start_time = j.end_time();
    b.diverged = j.diverged;
    out.branches.push_back(std::move(b));
  }
  advance(policy, task, out.branches, config.branch_length, workers,
          [](std::size_t, int, const Action& a) { return a; });

  // Every value-network estimate needed below, evaluated as one batch.
  std::vector<const Observation*> queries;
  auto enqueue = [&queries](const Observation& o) {
    queries.push_back(&o);
    return queries.size() - 1;
  };
  std::vector<std::size_t> initial_tail, branch_tail;
  for (const auto& t : out.initial) initial_tail.push_back(enqueue(t.observations.back()));
  for (const auto& t : out.branches) branch_tail.push_back(enqueue(t.observations.back()));

  struct PairPlan {
    int junction;
    int end_time;
    std::size_t parent_query;
    std::size_t perturbed_query;
  };
  std::vector<PairPlan> plans;
  for (const auto& j : out.junctions) {
    if (j.steps() == 0) continue;
    const Trajectory& parent = out.initial[static_cast<std::size_t>(j.parent)];
    const Continuation f{j, out.branches[static_cast<std::size_t>(j.id)]};
    const int end = std::min(parent.end_time(), f.end_time());
    plans.push_back({j.id, end, enqueue(parent.observations[static_cast<std::size_t>(end)]),
                     enqueue(f.observation_at(end))});
  }

  Eigen::MatrixXd query_obs(static_cast<Eigen::Index>(queries.size()), kObservationDim);
  for (std::size_t q = 0; q < queries.size(); ++q) query_obs.row(static_cast<Eigen::Index>(q)) = queries[q]->transpose();
  const Eigen::VectorXd v = queries.empty() ? Eigen::VectorXd() : chunked_forward(value, query_obs, workers).col(0).eval();

  // Monte-Carlo targets for every on-policy state.
  Eigen::Index rows = 0;
  for (const auto& t : out.initial) rows += t.steps();
  for (const auto& t : out.branches) rows += t.steps();
  out.on_policy.observations.resize(rows, kObservationDim);
  out.on_policy.targets.resize(rows);
  Eigen::Index row = 0;
  auto add_targets = [&](const Trajectory& t, double tail) {
    const auto values = mc_values(t.costs, tail, gamma);
    for (std::size_t i = 0; i < values.size(); ++i, ++row) {
      out.on_policy.observations.row(row) = t.observations[i].transpose();
      out.on_policy.targets[row] = values[i];
    }
  };
  for (std::size_t i = 0; i < out.initial.size(); ++i) add_targets(out.initial[i], v[static_cast<Eigen::Index>(initial_tail[i])]);
  for (std::size_t i = 0; i < out.branches.size(); ++i) add_targets(out.branches[i], v[static_cast<Eigen::Index>(branch_tail[i])]);

  // Junction pairs with both continuations cut at the same time index.
  for (const auto& plan : plans) {
    const Trajectory& j = out.junctions[static_cast<std::size_t>(plan.junction)];
    const Trajectory& parent = out.initial[static_cast<std::size_t>(j.parent)];
    const Continuation f{j, out.branches[static_cast<std::size_t>(plan.junction)]};
    const int k = j.start_time;

    double on_policy = v[static_cast<Eigen::Index>(plan.parent_query)];
    for (int t = plan.end_time - 1; t >= k; --t) on_policy = parent.costs[static_cast<std::size_t>(t)] + gamma * on_policy;
    double perturbed = v[static_cast<Eigen::Index>(plan.perturbed_query)];
    for (int t = plan.end_time - 1; t >= k + 1; --t) perturbed = f.cost_at(t) + gamma * perturbed;

    JunctionPair pair;
    pair.state = j.observations.front();
    pair.on_policy_action = parent.actions[static_cast<std::size_t>(k)];
    pair.perturbed_action = j.actions.front();
    pair.cost = j.costs.front();
    pair.next_value = perturbed;
    pair.on_policy_value = on_policy;
    pair.initial_id = j.parent;
    pair.site_step = k;
    pair.junction_id = j.id;
    out.pairs.push_back(pair);
  }

  // Statistics.
  double initial_cost = 0.0;
  std::int64_t initial_steps = 0;
  for (const auto& t : out.initial) {
    initial_cost = std::accumulate(t.costs.begin(), t.costs.end(), initial_cost);
    initial_steps += t.steps();
    out.stats.divergences += t.diverged ? 1 : 0;
  }
  for (std::size_t i = 0; i < out.junctions.size(); ++i) {
    const bool junction_diverged = out.junctions[i].diverged;
    out.stats.divergences += junction_diverged ? 1 : 0;
    out.stats.divergences += (!junction_diverged && out.branches[i].diverged) ? 1 : 0;
  }
  out.stats.simulated_steps = initial_steps;
  for (const auto& t : out.junctions) out.stats.simulated_steps += t.steps();
  for (const auto& t : out.branches) out.stats.simulated_steps += t.steps();
  out.stats.mean_cost = initial_steps > 0 ? initial_cost / static_cast<double>(initial_steps) : 0.0;
  out.stats.pairs = static_cast<int>(out.pairs.size());
  return out;
}

}  // namespace quadrl
