// Shared fixtures and independent oracles for the test suites.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "coxmix/rng.hpp"
#include "coxmix/simulator.hpp"
#include "coxmix/types.hpp"

namespace coxmix::testing {

// Central finite difference of a scalar function of the flat parameters.
// The third latent coordinate is re-synchronized to mu3 inside `fn`, so the
// mu3 derivative includes the fixed-effect chain.
inline Eigen::VectorXd central_difference(
    const std::function<double(const Eigen::VectorXd&)>& fn,
    const Eigen::VectorXd& at, double h) {
  Eigen::VectorXd grad(at.size());
  for (int c = 0; c < at.size(); ++c) {
    Eigen::VectorXd hi = at, lo = at;
    hi(c) += h;
    lo(c) -= h;
    grad(c) = (fn(hi) - fn(lo)) / (2.0 * h);
  }
  return grad;
}

// Small random instance for gradient checks: valid theta, simulated data,
// latents consistent with mu3.
struct SmallInstance {
  Theta theta;
  Dataset data;
  std::vector<LatentVector> latents;
};

inline SmallInstance random_small_instance(std::uint64_t seed, int max_n = 5,
                                           int max_j = 5, int max_p = 5) {
  RngStream rng(seed);
  const int n = 1 + static_cast<int>(rng.uniform() * max_n);
  const int j = 1 + static_cast<int>(rng.uniform() * max_j);
  const int p = static_cast<int>(rng.uniform() * (max_p + 1));

  Theta theta;
  theta.baseline_a = rng.uniform(60.0, 100.0);
  theta.baseline_b = rng.uniform(2.0, 8.0);
  theta.beta.resize(p);
  for (int k = 0; k < p; ++k) theta.beta(k) = rng.uniform(-1.0, 1.0);
  theta.alpha = rng.uniform(-2.0, 2.0);
  theta.mu << rng.uniform(0.2, 0.5), rng.uniform(70.0, 100.0),
      rng.uniform(5.0, 10.0);
  theta.gamma_sq << rng.uniform(0.005, 0.05), rng.uniform(5.0, 30.0);
  theta.sigma_sq = rng.uniform(0.005, 0.05);

  simulator::SimConfig config;
  config.n = n;
  config.n_obs = j;
  config.n_cov = p;
  config.theta_true = theta;
  config.seed = derive_seed(seed, Stream::Custom, 1);
  auto sim = simulator::simulate(config);

  SmallInstance inst;
  inst.theta = theta;
  inst.data = sim.data;
  inst.latents = sim.latents;
  // Perturb the free latent coordinates so the prior terms are exercised
  // away from the sampled values.
  RngStream jitter(derive_seed(seed, Stream::Custom, 2));
  for (auto& z : inst.latents) {
    z.z1 += 0.02 * jitter.normal();
    z.z2 += 0.5 * jitter.normal();
  }
  return inst;
}

inline Theta table1_theta() { return simulator::study_theta(100); }

}  // namespace coxmix::testing
