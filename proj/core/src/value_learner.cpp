#include "quadrl/value_learner.hpp"

#include "quadrl/errors.hpp"
#include "quadrl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace quadrl {

void ValueFitConfig::validate() const {
  if (max_iterations < 1) throw ConfigError("value.max_iterations must be at least 1");
  if (!(loss_threshold > 0.0)) throw ConfigError("value.loss_threshold must be positive");
  if (!(step_size > 0.0)) throw ConfigError("value.step_size must be positive");
  if (!(huber.delta > 0.0)) throw ConfigError("value.huber_delta must be positive");
  if (sample_cap < 0) throw ConfigError("value.sample_cap must be non-negative");
}

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEpsilon = 1e-8;

void check_finite(double loss) {
  if (!std::isfinite(loss)) throw DivergenceError("value fit produced a non-finite loss");
}

}  // namespace

ValueFitResult fit_value(const Mlp& value, const Eigen::Ref<const Eigen::MatrixXd>& observations,
                         const Eigen::Ref<const Eigen::VectorXd>& targets, const ValueFitConfig& config,
                         std::uint64_t subsample_seed) {
  config.validate();
  if (observations.rows() == 0) throw DimensionError("fit_value needs at least one sample");
  if (targets.size() != observations.rows()) throw DimensionError("one target per observation row required");
  const int workers = resolve_workers(config.workers);

  Eigen::MatrixXd sub_obs;
  Eigen::VectorXd sub_targets;
  const bool subsample = config.sample_cap > 0 && observations.rows() > config.sample_cap;
  if (subsample) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(observations.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::mt19937_64 rng(subsample_seed);
    // Partial Fisher-Yates: the first sample_cap entries are a uniform subset.
    for (Eigen::Index i = 0; i < config.sample_cap; ++i) {
      std::uniform_int_distribution<Eigen::Index> pick(i, observations.rows() - 1);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(config.sample_cap));
    std::sort(idx.begin(), idx.end());
    sub_obs.resize(config.sample_cap, observations.cols());
    sub_targets.resize(config.sample_cap);
    for (Eigen::Index i = 0; i < config.sample_cap; ++i) {
      sub_obs.row(i) = observations.row(idx[static_cast<std::size_t>(i)]);
      sub_targets[i] = targets[idx[static_cast<std::size_t>(i)]];
    }
  }
  const Eigen::Ref<const Eigen::MatrixXd> x = subsample ? Eigen::Ref<const Eigen::MatrixXd>(sub_obs) : observations;
  const Eigen::Ref<const Eigen::VectorXd> y = subsample ? Eigen::Ref<const Eigen::VectorXd>(sub_targets) : targets;

  ValueFitResult result{value, 0.0, 0, {}};
  LossGradient current = loss_gradient(result.value, x, y, config.huber, workers);
  check_finite(current.loss);
  result.loss_history.push_back(current.loss);

  const Eigen::Index n = value.parameter_count();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  double step = config.step_size;
  int t = 0;
  Mlp candidate = result.value;

  for (result.iterations = 1; result.iterations <= config.max_iterations; ++result.iterations) {
    if (current.loss < config.loss_threshold) break;
    if (result.iterations == config.max_iterations) break;

    const Eigen::VectorXd m_next = kBeta1 * m + (1.0 - kBeta1) * current.gradient;
    const Eigen::VectorXd v_next = kBeta2 * v + (1.0 - kBeta2) * current.gradient.array().square().matrix();
    const double c1 = 1.0 - std::pow(kBeta1, t + 1);
    const double c2 = 1.0 - std::pow(kBeta2, t + 1);
    const Eigen::VectorXd update =
        ((m_next / c1).array() / ((v_next / c2).array().sqrt() + kEpsilon)).matrix() * step;

    candidate.set_parameters(result.value.parameters() - update);
    LossGradient trial = loss_gradient(candidate, x, y, config.huber, workers);
    check_finite(trial.loss);
    if (trial.loss <= current.loss) {
      result.value.set_parameters(candidate.parameters());
      current = std::move(trial);
      m = m_next;
      v = v_next;
      ++t;
      result.loss_history.push_back(current.loss);
    } else {
      step *= 0.5;
    }
  }
  result.iterations = std::min(result.iterations, config.max_iterations);
  result.final_loss = current.loss;
  return result;
}

}  // namespace quadrl
