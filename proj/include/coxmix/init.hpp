// Data-driven starting values: per-individual logistic curve fits feed the
// latent-chain start and the initial (mu, gamma_sq, sigma_sq).

#pragma once

#include <Eigen/Dense>

#include "coxmix/types.hpp"

namespace coxmix::init {

struct LogisticFit {
  double z1 = 0.0;       // asymptote
  double z2 = 0.0;       // midpoint
  double z3 = 1.0;       // growth rate
  double sigma_sq = 0.0; // residual variance of the fit
};

// Least-squares logistic fit to one trajectory: half-max heuristics for the
// start, then damped Gauss-Newton.
LogisticFit fit_logistic_curve(const Eigen::VectorXd& times,
                               const Eigen::VectorXd& y);

struct DataInit {
  Eigen::Vector3d mu0;
  Eigen::Vector2d gamma_sq0;
  double sigma_sq0 = 0.0;
  Eigen::MatrixX2d latents;  // per-individual (Z1, Z2) start values
};

// Robust aggregates of the per-individual fits: medians for the means,
// outlier-clamped variances for the latent variances.
DataInit compute_data_init(const Dataset& data);

}  // namespace coxmix::init
