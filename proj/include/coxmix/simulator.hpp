// Dataset generation from the joint model, including the study preset.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "coxmix/types.hpp"

namespace coxmix::simulator {

struct SimConfig {
  int n = 100;       // individuals
  int n_obs = 20;    // longitudinal observations per individual
  int n_cov = 100;   // covariates
  Theta theta_true;
  // Observation grid: n_obs equally spaced times on [t_start, t_end] unless
  // a custom grid is given. The default straddles the logistic midpoint and
  // the hazard's active region.
  double t_start = 50.0;
  double t_end = 110.0;
  Eigen::VectorXd custom_grid;
  double cov_low = -1.0;   // covariates i.i.d. uniform on [cov_low, cov_high]
  double cov_high = 1.0;
  int quadrature_order = 64;
  std::uint64_t seed = 0;

  void validate() const;

  Eigen::VectorXd obs_grid() const;
};

// True parameter values of the simulation study: N=100, J=20, p=100, a=80,
// b=35, mu=(0.3, 90, 7.5), gamma_sq=(2.5e-3, 20), sigma_sq=1e-3,
// alpha=11.11, beta=(-2,-1,1,2,0,...,0).
Theta study_theta(int n_cov = 100);
SimConfig study_config(std::uint64_t seed);

struct SimResult {
  Dataset data;
  std::vector<LatentVector> latents;  // true latents, diagnostics only
  Eigen::VectorXd uniform_draws;      // survival uniforms, for replay checks
};

// Z_i1 ~ N(mu1, g1sq), Z_i2 ~ N(mu2, g2sq), Z_i3 = mu3; Y = m + noise;
// U uniform; T by inverse-transform sampling of the joint hazard.
SimResult simulate(const SimConfig& config);

}  // namespace coxmix::simulator
