#pragma once

#include "quadrl/quad_sim.hpp"

#include <Eigen/Dense>

#include <random>

namespace quadrl {

inline constexpr int kObservationDim = 18;
inline constexpr int kActionDim = 4;

/// [R row-major (9), scaled p - waypoint (3), scaled v (3), scaled w (3)]
using Observation = Eigen::Matrix<double, kObservationDim, 1>;
using Action = Vec4;

struct ObservationScales {
  double position = 0.5;           ///< 1/m
  double velocity = 0.25;          ///< s/m
  double angular_velocity = 0.15;  ///< s/rad
};

/// Per-step cost r = wp|p| + wa|a| + ww|w| + wv|v| and the discount.
struct CostWeights {
  double position = 4e-3;
  double action = 2e-4;
  double angular_velocity = 3e-4;
  double velocity = 5e-4;
  double discount = 0.99;

  void validate() const;
};

/// Uniform box around `center` for p, v and w; orientation uniform on SO(3).
struct InitDistribution {
  double position_bound = 1.0;
  double velocity_bound = 1.0;
  double angular_velocity_bound = 1.0;
  Vec3 center = Vec3::Zero();

  void validate() const;
};

/// Everything needed to turn the simulator into the learning task.
struct TaskConfig {
  QuadParams quad;
  PdGains gains;
  ObservationScales scales;
  CostWeights cost;
  InitDistribution init;
  double action_scale = 1.0;  ///< newtons per unit of network output

  void validate() const;
};

Observation observe(const QuadState& state, const Vec3& waypoint, const ObservationScales& scales);

/// Position enters relative to the training origin; `action_newtons` is the
/// commanded rotor thrust minus the hover bias, in newtons.
double cost(const QuadState& state, const Action& action_newtons, const CostWeights& weights);

/// Uniformly distributed rotation (Shoemake's uniform unit quaternion).
Mat3 uniform_rotation(std::mt19937_64& rng);

QuadState sample_initial(const InitDistribution& dist, std::mt19937_64& rng);

/// Thrust command: threshold(hover + alloc^-1(0, pd torque) + scale * policy_out).
Vec4 act(const Action& policy_out, const QuadState& state, const QuadParams& params, const PdGains& gains,
         double action_scale);

inline Vec4 act(const Action& policy_out, const QuadState& state, const TaskConfig& task) {
  return act(policy_out, state, task.quad, task.gains, task.action_scale);
}

/// cost() of applying `thrust` (already thresholded) in `state`.
double step_cost(const QuadState& state, const Vec4& thrust, const TaskConfig& task);

}  // namespace quadrl
