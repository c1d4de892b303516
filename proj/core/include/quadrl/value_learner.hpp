#pragma once

#include "quadrl/mlp.hpp"

#include <cstdint>
#include <vector>

namespace quadrl {

struct ValueFitConfig {
  int max_iterations = 200;
  double loss_threshold = 1e-4;  ///< absolute mean Huber loss
  double step_size = 1e-3;
  HuberSpec huber;
  /// Samples beyond this count are subsampled uniformly without replacement; 0 disables.
  std::int64_t sample_cap = 200000;
  int workers = 0;

  void validate() const;
};

struct ValueFitResult {
  Mlp value;
  double final_loss = 0.0;
  int iterations = 0;                ///< loss/gradient evaluations, including the first
  std::vector<double> loss_history;  ///< accepted losses, non-increasing
};

/// Fits a scalar network to Monte-Carlo targets by minimizing the mean Huber loss.
///
/// Full-batch Adam with a safeguard: a step that increases the loss is
/// rejected, and the step size is halved. Stops once the loss drops below
/// the threshold or after max_iterations evaluations. Throws DivergenceError
/// on a non-finite loss.
ValueFitResult fit_value(const Mlp& value, const Eigen::Ref<const Eigen::MatrixXd>& observations,
                         const Eigen::Ref<const Eigen::VectorXd>& targets, const ValueFitConfig& config,
                         std::uint64_t subsample_seed = 0);

}  // namespace quadrl
