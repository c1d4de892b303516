#pragma once

#include <Eigen/Dense>

namespace quadrl {

/// Per-sample natural gradient n solving H n = g with H = J^T D J, g = J^T g_a.
struct NaturalGradientResult {
  Eigen::VectorXd natural_gradient;  ///< n
  Eigen::VectorXd gradient;          ///< g
  double mahalanobis_sq = 0.0;       ///< n^T H n, evaluated as n^T g
  int rank = 0;                      ///< numerical rank of L^T J
  bool rank_deficient = false;       ///< rank below the action dimension
};

/// v -> J^T (D (J v)), never forming the parameter-space Hessian.
Eigen::VectorXd hessian_vector_product(const Eigen::Ref<const Eigen::MatrixXd>& jacobian,
                                       const Eigen::Ref<const Eigen::MatrixXd>& metric,
                                       const Eigen::Ref<const Eigen::VectorXd>& v);

/// Pseudoinverse solve through the thin SVD of L^T J, where D = L L^T.
///
/// With L^T J = U S V^T (U: a x r, V: P x r), H^+ = V S^-2 V^T, so
/// n = V S^-2 V^T g. Singular values below 1e-12 * s_max are dropped and the
/// result is flagged rank-deficient. `metric` (D) must be symmetric positive-definite.
NaturalGradientResult natural_gradient_svd(const Eigen::Ref<const Eigen::MatrixXd>& jacobian,
                                           const Eigen::Ref<const Eigen::MatrixXd>& metric,
                                           const Eigen::Ref<const Eigen::VectorXd>& action_gradient);

/// Conjugate gradient on H n = g from n = 0 with matrix-free Hessian products.
NaturalGradientResult natural_gradient_cg(const Eigen::Ref<const Eigen::MatrixXd>& jacobian,
                                          const Eigen::Ref<const Eigen::MatrixXd>& metric,
                                          const Eigen::Ref<const Eigen::VectorXd>& action_gradient,
                                          int iterations = 10);

/// |H n - g| for a computed result.
double natural_gradient_residual(const Eigen::Ref<const Eigen::MatrixXd>& jacobian,
                                 const Eigen::Ref<const Eigen::MatrixXd>& metric,
                                 const NaturalGradientResult& result);

}  // namespace quadrl
