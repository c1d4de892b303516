#include "quadrl/task_env.hpp"

#include "quadrl/errors.hpp"

#include <cmath>
#include <numbers>

namespace quadrl {

void CostWeights::validate() const {
  if (position < 0.0 || action < 0.0 || angular_velocity < 0.0 || velocity < 0.0) {
    throw ConfigError("cost weights must be non-negative");
  }
  if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("cost.discount must be in [0, 1)");
}

void InitDistribution::validate() const {
  auto ok = [](double b) { return b >= 0.0 && std::isfinite(b); };
  if (!ok(position_bound) || !ok(velocity_bound) || !ok(angular_velocity_bound) || !center.allFinite()) {
    throw ConfigError("init bounds must be finite and non-negative");
  }
}

void TaskConfig::validate() const {
  quad.validate();
  cost.validate();
  init.validate();
  if (!(action_scale > 0.0)) throw ConfigError("task.action_scale must be positive");
}

Observation observe(const QuadState& state, const Vec3& waypoint, const ObservationScales& scales) {
  Observation obs;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) obs[3 * r + c] = state.rotation(r, c);
  }
  obs.segment<3>(9) = (state.position - waypoint) * scales.position;
  obs.segment<3>(12) = state.velocity * scales.velocity;
  obs.segment<3>(15) = state.angular_velocity * scales.angular_velocity;
  return obs;
}

double cost(const QuadState& state, const Action& action_newtons, const CostWeights& weights) {
  return weights.position * state.position.norm() + weights.action * action_newtons.norm() +
         weights.angular_velocity * state.angular_velocity.norm() + weights.velocity * state.velocity.norm();
}

Mat3 uniform_rotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u1 = unit(rng);
  const double u2 = unit(rng);
  const double u3 = unit(rng);
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const Eigen::Quaterniond q(b * std::cos(two_pi * u3), a * std::sin(two_pi * u2), a * std::cos(two_pi * u2),
                             b * std::sin(two_pi * u3));
  return q.normalized().toRotationMatrix();
}

QuadState sample_initial(const InitDistribution& dist, std::mt19937_64& rng) {
  auto box = [&rng](double bound) {
    if (bound == 0.0) return Vec3::Zero().eval();
    std::uniform_real_distribution<double> u(-bound, bound);
    const double x = u(rng);
    const double y = u(rng);
    const double z = u(rng);
    return Vec3(x, y, z);
  };
  QuadState s;
  s.rotation = uniform_rotation(rng);
  s.position = dist.center + box(dist.position_bound);
  s.velocity = box(dist.velocity_bound);
  s.angular_velocity = box(dist.angular_velocity_bound);
  return s;
}

Vec4 act(const Action& policy_out, const QuadState& state, const QuadParams& params, const PdGains& gains,
         double action_scale) {
  const Vec4 pd = thrust_for_wrench(Wrench{0.0, pd_attitude(state, gains)}, params);
  const Vec4 raw = Vec4::Constant(hover_thrust(params)) + pd + action_scale * policy_out;
  return threshold(raw);
}

double step_cost(const QuadState& state, const Vec4& thrust, const TaskConfig& task) {
  return cost(state, (thrust.array() - hover_thrust(task.quad)).matrix(), task.cost);
}

}  // namespace quadrl
