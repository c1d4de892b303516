#pragma once

// Scalar linear-quadratic problem used to check the junction-pair gradient
// estimator against a closed form.
//
//   x' = a x + b u,  r(x, u) = q x^2 + rho u^2,  u = w x  (network output 0)
//
// For |a + b w| * sqrt(gamma) < 1 the value of the linear policy is V(x) = P x^2
// with P = (q + rho w^2) / (1 - gamma (a + b w)^2).

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "quadrl/mlp.hpp"
#include "quadrl/policy_optimizer.hpp"
#include "quadrl/rollout.hpp"

namespace quadrl::testing {

struct LqToy {
  double a = 0.9;
  double b = 0.5;
  double q = 1.0;
  double rho = 0.1;
  double gamma = 0.99;

  double cost(double x, double u) const { return q * x * x + rho * u * u; }
  double next(double x, double u) const { return a * x + b * u; }

  double value_coefficient(double w) const {
    const double c = a + b * w;
    return (q + rho * w * w) / (1.0 - gamma * c * c);
  }

  // Linear policy as a [1, 4] network; only output 0 drives the system.
  static Mlp policy(double w) {
    Mlp net({1, 4});
    Eigen::VectorXd p = Eigen::VectorXd::Zero(net.parameter_count());
    p[0] = w;
    net.set_parameters(p);
    return net;
  }

  // Monte-Carlo value of the policy from x over `horizon` steps with the
  // exact value as terminal estimate, through the library's backward recursion.
  double mc_value(double w, double x, int horizon) const {
    std::vector<double> costs;
    for (int t = 0; t < horizon; ++t) {
      const double u = w * x;
      costs.push_back(cost(x, u));
      x = next(x, u);
    }
    const double terminal = value_coefficient(w) * x * x;
    return quadrl::mc_values(costs, terminal, gamma).front();
  }

  // d/dtheta E_x[Q(x, pi(x))] along the deterministic policy gradient, with x
  // uniform on [-1, 1]: E[dpi/dtheta * dQ/du]. Only the (w, output 0) weight has
  // a nonzero entry, 2k E[x^2] = 2k/3 with k = rho w + gamma P b (a + b w).
  Eigen::VectorXd analytic_gradient(double w) const {
    const double P = value_coefficient(w);
    const double k = rho * w + gamma * P * b * (a + b * w);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(policy(w).parameter_count());
    g[0] = 2.0 * k / 3.0;
    return g;
  }

  // Mean over K junction pairs of J^T g_a, using the library's advantage and
  // two-point action gradient. Noise is applied on output 0 only.
  Eigen::VectorXd junction_estimate(double w, double sigma, int pairs, std::uint64_t seed, int horizon = 50) const {
    const Mlp net = policy(w);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> site(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, sigma);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(net.parameter_count());
    for (int k = 0; k < pairs; ++k) {
      const double x = site(rng);
      Eigen::VectorXd in(1);
      in << x;
      JunctionPair pair;
      pair.on_policy_action = forward(net, in);
      pair.perturbed_action = pair.on_policy_action;
      double eps = 0.0;
      while (eps == 0.0) eps = noise(rng);
      pair.perturbed_action[0] += eps;
      const double u = pair.perturbed_action[0];
      pair.cost = cost(x, u);
      pair.next_value = mc_value(w, next(x, u), horizon);
      pair.on_policy_value = mc_value(w, x, horizon + 1);
      const Action g_a = action_gradient(pair, advantage(pair, gamma));
      sum += output_jacobian(net, in).transpose() * g_a;
    }
    return sum / static_cast<double>(pairs);
  }
};

}  // namespace quadrl::testing
