#include "quadrl/natural_gradient.hpp"

#include "quadrl/errors.hpp"

#include <cmath>
#include <string>

namespace quadrl {

namespace {

void check_shapes(const Eigen::Ref<const Eigen::MatrixXd>& jacobian, const Eigen::Ref<const Eigen::MatrixXd>& metric,
                  const Eigen::Ref<const Eigen::VectorXd>& action_gradient) {
  const Eigen::Index a = jacobian.rows();
  if (metric.rows() != a || metric.cols() != a) {
    throw DimensionError("metric must be " + std::to_string(a) + "x" + std::to_string(a));
  }
  if (action_gradient.size() != a) throw DimensionError("action gradient length must match Jacobian rows");
}

}  // namespace

Eigen::VectorXd hessian_vector_product(const Eigen::Ref<const Eigen::MatrixXd>& jacobian,
                                       const Eigen::Ref<const Eigen::MatrixXd>& metric,
                                       const Eigen::Ref<const Eigen::VectorXd>& v) {
  const Eigen::VectorXd jv = jacobian * v;
  return jacobian.transpose() * (metric * jv);
}

NaturalGradientResult natural_gradient_svd(const Eigen::Ref<const Eigen::MatrixXd>& jacobian,
                                           const Eigen::Ref<const Eigen::MatrixXd>& metric,
                                           const Eigen::Ref<const Eigen::VectorXd>& action_gradient) {
  check_shapes(jacobian, metric, action_gradient);
  const Eigen::LLT<Eigen::MatrixXd> llt(metric);
  if (llt.info() != Eigen::Success) throw DimensionError("metric is not positive-definite");

  NaturalGradientResult out;
  out.gradient = jacobian.transpose() * action_gradient;

  const Eigen::MatrixXd scaled = llt.matrixL().transpose() * jacobian;  // L^T J, a x P
  // The thin SVD of the tall transpose gives V as its U factor: (L^T J)^T = V S U^T.
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled.transpose(), Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd.singularValues();
  const Eigen::MatrixXd& v = svd.matrixU();

  const double cutoff = s.size() > 0 ? 1e-12 * s[0] : 0.0;
  int rank = 0;
  while (rank < s.size() && s[rank] > cutoff) ++rank;
  out.rank = rank;
  out.rank_deficient = rank < jacobian.rows();

  const auto basis = v.leftCols(rank);
  const Eigen::VectorXd coeff =
      (basis.transpose() * out.gradient).cwiseQuotient(s.head(rank).cwiseAbs2());
  out.natural_gradient = basis * coeff;
  out.mahalanobis_sq = out.natural_gradient.dot(out.gradient);
  return out;
}

NaturalGradientResult natural_gradient_cg(const Eigen::Ref<const Eigen::MatrixXd>& jacobian,
                                          const Eigen::Ref<const Eigen::MatrixXd>& metric,
                                          const Eigen::Ref<const Eigen::VectorXd>& action_gradient,
                                          int iterations) {
  check_shapes(jacobian, metric, action_gradient);
  NaturalGradientResult out;
  out.gradient = jacobian.transpose() * action_gradient;
  out.rank = static_cast<int>(jacobian.rows());

  Eigen::VectorXd x = Eigen::VectorXd::Zero(jacobian.cols());
  Eigen::VectorXd r = out.gradient;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  const double stop = 1e-30 * std::max(rr, 1e-300);
  for (int it = 0; it < iterations && rr > stop; ++it) {
    const Eigen::VectorXd hp = hessian_vector_product(jacobian, metric, p);
    const double curvature = p.dot(hp);
    if (!(curvature > 0.0)) break;
    const double alpha = rr / curvature;
    x += alpha * p;
    r -= alpha * hp;
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  out.natural_gradient = std::move(x);
  out.mahalanobis_sq = out.natural_gradient.dot(out.gradient);
  return out;
}

double natural_gradient_residual(const Eigen::Ref<const Eigen::MatrixXd>& jacobian,
                                 const Eigen::Ref<const Eigen::MatrixXd>& metric,
                                 const NaturalGradientResult& result) {
  return (hessian_vector_product(jacobian, metric, result.natural_gradient) - result.gradient).norm();
}

}  // namespace quadrl
