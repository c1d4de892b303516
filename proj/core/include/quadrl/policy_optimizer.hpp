#pragma once

#include "quadrl/mlp.hpp"
#include "quadrl/natural_gradient.hpp"
#include "quadrl/rollout.hpp"

#include <span>
#include <string>

namespace quadrl {

enum class NaturalGradientSolver { svd, conjugate_gradient };

const char* to_string(NaturalGradientSolver solver);
NaturalGradientSolver parse_solver(const std::string& name);

struct PolicyOptConfig {
  double step_size = 1000.0;   ///< alpha; the trust region usually binds first
  double trust_region = 0.1;   ///< delta, squared Mahalanobis units
  Mat4 noise_covariance = Mat4::Identity() * (0.33 * 0.33);
  NaturalGradientSolver solver = NaturalGradientSolver::svd;
  int cg_iterations = 10;
  double discount = 0.99;
  int workers = 0;

  void validate() const;
};

/// r_f + gamma v_f_next - v_p
double advantage(const JunctionPair& pair, double gamma);

/// Two-point linear model of the advantage along the perturbation:
/// A * (a_f - a_p) / |a_f - a_p|^2. Throws DegeneratePairError if |a_f - a_p| < 1e-12.
Action action_gradient(const JunctionPair& pair, double advantage);

struct PolicyUpdateStats {
  double mean_advantage = 0.0;
  double applied_step = 0.0;      ///< alpha' actually used
  double max_mahalanobis_sq = 0.0;
  int used_pairs = 0;
  int filtered_pairs = 0;         ///< degenerate or non-finite pairs dropped
  int rank_deficient = 0;
};

struct PolicyUpdate {
  Mlp policy;
  PolicyUpdateStats stats;
};

/// theta <- theta - (alpha'/K) sum_k n_k, with alpha' <= alpha the largest
/// step such that alpha'^2 max_k n_k^T H_k n_k < delta (strict, margin 1e-6).
/// Throws NoUpdateError if every pair is rejected.
PolicyUpdate update_policy(const Mlp& policy, std::span<const JunctionPair> pairs, const PolicyOptConfig& config);

/// Largest admissible step for the worst per-sample Mahalanobis length.
double trust_region_step(double step_size, double trust_region, double max_mahalanobis_sq);

}  // namespace quadrl
