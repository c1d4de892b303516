#pragma once

#include <Eigen/Dense>

namespace quadrl {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

Mat3 skew(const Vec3& v);

/// Rotation matrix of the rotation vector (axis * angle), Rodrigues form.
Mat3 so3_exp(const Vec3& rotation_vector);

/// Euler vector (axis * angle, angle in [0, pi]) of a rotation matrix.
///
/// At angle pi the sign of the axis is ambiguous. The axis is then taken from
/// the column of (R + I) with the largest diagonal entry, normalized, with that
/// diagonal component kept positive. Near pi the same column is used for
/// conditioning and the sign is fixed by the antisymmetric part of R.
Vec3 so3_log(const Mat3& rotation);

/// R * Exp(delta): increment a body-to-world rotation by a body-frame rotation vector.
inline Mat3 boxplus(const Mat3& rotation, const Vec3& delta) { return rotation * so3_exp(delta); }

/// max |R^T R - I|
double orthonormality_error(const Mat3& rotation);

/// Nearest rotation matrix in the Frobenius sense (polar factor via SVD).
Mat3 orthonormalize(const Mat3& m);

inline Mat3 rot_x(double angle) { return so3_exp(Vec3::UnitX() * angle); }
inline Mat3 rot_y(double angle) { return so3_exp(Vec3::UnitY() * angle); }
inline Mat3 rot_z(double angle) { return so3_exp(Vec3::UnitZ() * angle); }

}  // namespace quadrl
