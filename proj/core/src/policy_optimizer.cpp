#include "quadrl/policy_optimizer.hpp"

#include "quadrl/errors.hpp"
#include "quadrl/parallel.hpp"

#include <cmath>
#include <optional>

namespace quadrl {

const char* to_string(NaturalGradientSolver solver) {
  return solver == NaturalGradientSolver::svd ? "svd" : "cg";
}

NaturalGradientSolver parse_solver(const std::string& name) {
  if (name == "svd") return NaturalGradientSolver::svd;
  if (name == "cg" || name == "conjugate-gradient") return NaturalGradientSolver::conjugate_gradient;
  throw ConfigError("policy.solver: unknown solver '" + name + "' (expected svd or cg)");
}

void PolicyOptConfig::validate() const {
  if (!(step_size > 0.0)) throw ConfigError("policy.step_size must be positive");
  if (!(trust_region > 0.0)) throw ConfigError("policy.trust_region must be positive");
  if (cg_iterations < 1) throw ConfigError("policy.cg_iterations must be at least 1");
  if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("policy.discount must be in [0, 1)");
  Eigen::LLT<Mat4> llt(noise_covariance);
  if (llt.info() != Eigen::Success) throw ConfigError("noise covariance must be positive-definite");
}

double advantage(const JunctionPair& pair, double gamma) {
  return pair.cost + gamma * pair.next_value - pair.on_policy_value;
}

Action action_gradient(const JunctionPair& pair, double advantage) {
  const Action delta = pair.perturbed_action - pair.on_policy_action;
  const double norm_sq = delta.squaredNorm();
  if (!(std::sqrt(norm_sq) >= 1e-12)) throw DegeneratePairError("perturbation below 1e-12");
  return advantage * delta / norm_sq;
}

double trust_region_step(double step_size, double trust_region, double max_mahalanobis_sq) {
  if (step_size * step_size * max_mahalanobis_sq < trust_region) return step_size;
  return std::sqrt(trust_region / max_mahalanobis_sq) * (1.0 - 1e-6);
}

PolicyUpdate update_policy(const Mlp& policy, std::span<const JunctionPair> pairs, const PolicyOptConfig& config) {
  config.validate();
  if (policy.output_dim() != kActionDim) throw DimensionError("policy must have 4 outputs");
  const Eigen::MatrixXd metric = config.noise_covariance.inverse();
  const int workers = resolve_workers(config.workers);

  struct PairResult {
    std::optional<NaturalGradientResult> solve;
    double advantage = 0.0;
  };
  std::vector<PairResult> results(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t k) {
    const JunctionPair& pair = pairs[k];
    const double a = advantage(pair, config.discount);
    results[k].advantage = a;
    Action ga;
    try {
      ga = action_gradient(pair, a);
    } catch (const DegeneratePairError&) {
      return;
    }
    if (!ga.allFinite()) return;
    const Eigen::MatrixXd jac = output_jacobian(policy, pair.state);
    NaturalGradientResult r = config.solver == NaturalGradientSolver::svd
                                  ? natural_gradient_svd(jac, metric, ga)
                                  : natural_gradient_cg(jac, metric, ga, config.cg_iterations);
    if (!r.natural_gradient.allFinite() || !std::isfinite(r.mahalanobis_sq)) return;
    results[k].solve = std::move(r);
  });

  PolicyUpdate out{policy, {}};
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(policy.parameter_count());
  double advantage_sum = 0.0;
  for (const auto& r : results) {
    if (!r.solve) {
      ++out.stats.filtered_pairs;
      continue;
    }
    ++out.stats.used_pairs;
    advantage_sum += r.advantage;
    sum += r.solve->natural_gradient;
    out.stats.max_mahalanobis_sq = std::max(out.stats.max_mahalanobis_sq, r.solve->mahalanobis_sq);
    out.stats.rank_deficient += r.solve->rank_deficient ? 1 : 0;
  }
  if (out.stats.used_pairs == 0) throw NoUpdateError("no usable junction pairs");

  const double k = static_cast<double>(out.stats.used_pairs);
  out.stats.mean_advantage = advantage_sum / k;
  out.stats.applied_step = trust_region_step(config.step_size, config.trust_region, out.stats.max_mahalanobis_sq);
  out.policy.set_parameters(policy.parameters() - (out.stats.applied_step / k) * sum);
  return out;
}

}  // namespace quadrl
