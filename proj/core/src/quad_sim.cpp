#include "quadrl/quad_sim.hpp"

#include "quadrl/errors.hpp"

#include <cmath>
#include <string>

namespace quadrl {

void QuadParams::validate() const {
  auto require = [](bool ok, const char* key) {
    if (!ok) throw ConfigError(std::string("invalid quad parameter: ") + key);
  };
  require(mass > 0.0 && std::isfinite(mass), "mass");
  require((inertia.array() > 0.0).all() && inertia.allFinite(), "inertia");
  require(arm_length > 0.0 && std::isfinite(arm_length), "arm_length");
  require(torque_coefficient >= 0.0 && std::isfinite(torque_coefficient), "torque_coefficient");
  require(dt > 0.0 && std::isfinite(dt), "dt");
  require(std::isfinite(gravity), "gravity");
  require(max_angular_speed > 0.0, "max_angular_speed");
}

Mat4 allocation_matrix(const QuadParams& params) {
  const double l = params.arm_length;
  const double k = params.torque_coefficient;
  Mat4 a;
  // Rows: force, tau_x, tau_y, tau_z. Torques are sum r_i x (T_i e_z).
  a << 1.0, 1.0, 1.0, 1.0,
       0.0, l, 0.0, -l,
       -l, 0.0, l, 0.0,
       k, -k, k, -k;
  return a;
}

Wrench allocate(const Vec4& thrust, const QuadParams& params) {
  const Vec4 w = allocation_matrix(params) * thrust;
  return {w[0], w.tail<3>()};
}

Vec4 thrust_for_wrench(const Wrench& wrench, const QuadParams& params) {
  // Closed-form inverse of allocation_matrix; needs l > 0 and kappa > 0.
  const double l = params.arm_length;
  const double k = params.torque_coefficient;
  const double f = wrench.force;
  const Vec3& tau = wrench.torque;
  if (k > 0.0) {
    const double yaw = tau.z() / (4.0 * k);
    return Vec4(0.25 * f - tau.y() / (2.0 * l) + yaw, 0.25 * f + tau.x() / (2.0 * l) - yaw,
                0.25 * f + tau.y() / (2.0 * l) + yaw, 0.25 * f - tau.x() / (2.0 * l) - yaw);
  }
  // Without reaction torque yaw is not actuated; return the least-squares thrusts.
  return Vec4(0.25 * f - tau.y() / (2.0 * l), 0.25 * f + tau.x() / (2.0 * l),
              0.25 * f + tau.y() / (2.0 * l), 0.25 * f - tau.x() / (2.0 * l));
}

Vec4 threshold(const Vec4& raw) {
  if (!raw.allFinite()) throw DivergenceError("non-finite thrust command");
  return raw.cwiseMax(0.0);
}

bool is_finite(const QuadState& state) {
  return state.position.allFinite() && state.rotation.allFinite() && state.velocity.allFinite() &&
         state.angular_velocity.allFinite();
}

QuadState step(const QuadState& state, const Vec4& thrust, const QuadParams& params) {
  const Wrench wrench = allocate(thrust, params);
  const double dt = params.dt;

  QuadState next;
  const Vec3 accel = state.rotation.col(2) * (wrench.force / params.mass) - Vec3(0.0, 0.0, params.gravity);
  next.velocity = state.velocity + accel * dt;
  next.position = state.position + next.velocity * dt;

  const Vec3& w = state.angular_velocity;
  const Vec3 iw = params.inertia.cwiseProduct(w);
  const Vec3 w_dot = (wrench.torque - w.cross(iw)).cwiseQuotient(params.inertia);
  next.angular_velocity = w + w_dot * dt;
  next.rotation = boxplus(state.rotation, next.angular_velocity * dt);
  if (orthonormality_error(next.rotation) > 1e-9) next.rotation = orthonormalize(next.rotation);

  if (!is_finite(next)) throw DivergenceError("simulation produced non-finite state");
  if (next.angular_velocity.norm() > params.max_angular_speed) {
    throw DivergenceError("angular speed exceeded " + std::to_string(params.max_angular_speed) + " rad/s");
  }
  return next;
}

Vec3 pd_attitude(const QuadState& state, const PdGains& gains) {
  const Mat3& r = state.rotation;
  const Vec3 q = so3_log(r);
  const Vec3 w_world = r * state.angular_velocity;
  return gains.kp.cwiseProduct(r.transpose() * q) + gains.kd.cwiseProduct(r.transpose() * w_world);
}

}  // namespace quadrl
