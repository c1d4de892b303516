#include "quadrl/so3.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace quadrl {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 so3_exp(const Vec3& rotation_vector) {
  const double theta_sq = rotation_vector.squaredNorm();
  const Mat3 k = skew(rotation_vector);
  double a = 0.0;
  double b = 0.0;
  if (theta_sq < 1e-12) {
    // Taylor expansions of sin(t)/t and (1 - cos(t))/t^2.
    a = 1.0 - theta_sq / 6.0;
    b = 0.5 - theta_sq / 24.0;
  } else {
    const double theta = std::sqrt(theta_sq);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta_sq;
  }
  return Mat3::Identity() + a * k + b * (k * k);
}

Vec3 so3_log(const Mat3& rotation) {
  const Vec3 vee(rotation(2, 1) - rotation(1, 2), rotation(0, 2) - rotation(2, 0),
                 rotation(1, 0) - rotation(0, 1));  // 2 sin(theta) * axis
  const double cos_theta = std::clamp((rotation.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double sin_theta = 0.5 * vee.norm();
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta < 1e-6) {
    // theta / (2 sin theta) ~ 1/2 + theta^2 / 12
    return (0.5 + theta * theta / 12.0) * vee;
  }
  if (std::numbers::pi - theta > 1e-6) {
    return (theta / (2.0 * sin_theta)) * vee;
  }

  // Near pi: (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T.
  const Mat3 sym = 0.5 * (rotation + rotation.transpose()) - cos_theta * Mat3::Identity();
  Eigen::Index k = 0;
  sym.diagonal().maxCoeff(&k);
  Vec3 axis = sym.col(k) / std::sqrt(std::max(sym(k, k), 1e-300));
  axis.normalize();
  if (axis.dot(vee) < 0.0) axis = -axis;
  return theta * axis;
}

double orthonormality_error(const Mat3& rotation) {
  return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
}

Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

}  // namespace quadrl
