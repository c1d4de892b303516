#pragma once

#include "quadrl/so3.hpp"

#include <Eigen/Dense>

namespace quadrl {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

/// Rigid-body state of the vehicle.
struct QuadState {
  Vec3 position = Vec3::Zero();          ///< m, world frame
  Mat3 rotation = Mat3::Identity();      ///< body-to-world
  Vec3 velocity = Vec3::Zero();          ///< m/s, world frame
  Vec3 angular_velocity = Vec3::Zero();  ///< rad/s, body frame

  friend bool operator==(const QuadState&, const QuadState&) = default;
};

/// Physical and integration parameters. Defaults: Hummingbird mass and
/// inertia, 0.17 m arm, 0.016 m yaw reaction coefficient, dt = 0.01 s.
///
/// Rotor layout ("+" configuration), body frame:
///   rotor 0 at (+l, 0, 0), rotor 1 at (0, +l, 0),
///   rotor 2 at (-l, 0, 0), rotor 3 at (0, -l, 0).
/// Rotors 0 and 2 spin so that their reaction torque is +kappa*T about body z,
/// rotors 1 and 3 give -kappa*T.
struct QuadParams {
  double mass = 0.665;
  Vec3 inertia = Vec3(0.007, 0.007, 0.012);
  double arm_length = 0.17;
  double torque_coefficient = 0.016;
  double gravity = 9.81;
  double dt = 0.01;
  double max_angular_speed = 100.0;  ///< rad/s; exceeding it is a divergence

  /// Throws ConfigError on non-physical values.
  void validate() const;
};

/// Collective force along body z and body torque.
struct Wrench {
  double force = 0.0;
  Vec3 torque = Vec3::Zero();
};

/// Maps rotor thrusts T to (force, tau_x, tau_y, tau_z).
Mat4 allocation_matrix(const QuadParams& params);

Wrench allocate(const Vec4& thrust, const QuadParams& params);

/// Inverse of allocate: rotor thrusts producing the given wrench. May be negative.
Vec4 thrust_for_wrench(const Wrench& wrench, const QuadParams& params);

/// Per-rotor thrust that balances gravity at identity attitude, m*g/4.
inline double hover_thrust(const QuadParams& params) { return params.mass * params.gravity / 4.0; }

/// Componentwise max(T, 0). Throws DivergenceError on non-finite input.
Vec4 threshold(const Vec4& raw);

/// One semi-implicit Euler step with an exponential-map rotation update.
///
///   v' = v + (R f e_z / m - g e_z) dt,            p' = p + v' dt
///   w' = w + I^-1 (tau - w x I w) dt,             R' = R Exp(w' dt)
///
/// R' is re-orthonormalized only when its drift exceeds 1e-9. Throws
/// DivergenceError if the result is non-finite or |w'| exceeds the cap.
/// `thrust` must already be thresholded.
QuadState step(const QuadState& state, const Vec4& thrust, const QuadParams& params);

/// Attitude PD gains, applied per body axis.
struct PdGains {
  Vec3 kp = Vec3(-0.2, -0.2, -0.2 / 6.0);
  Vec3 kd = Vec3(-0.06, -0.06, -0.06 / 6.0);
};

/// tau = kp .* (R^T q) + kd .* (R^T w_world), q = Log(R), w_world = R w_body.
Vec3 pd_attitude(const QuadState& state, const PdGains& gains);

bool is_finite(const QuadState& state);

}  // namespace quadrl
