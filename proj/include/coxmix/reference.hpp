// Serial reference implementations, kept for testing and benchmarking.
//
// These transcribe the model formulas directly with plain loops and no
// shared kernel code, so they double as an independent check on the
// parallel implementations. The benchmark target compares the two.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "coxmix/hazard.hpp"
#include "coxmix/types.hpp"

namespace coxmix::ref {

double complete_loglik(const Theta& theta, const Dataset& data,
                       const std::vector<LatentVector>& latents,
                       const hazard::QuadratureRule& rule);

Eigen::MatrixXd per_individual_grads(const Theta& theta, const Dataset& data,
                                     const std::vector<LatentVector>& latents,
                                     const hazard::QuadratureRule& rule);

Eigen::VectorXd complete_grad(const Theta& theta, const Dataset& data,
                              const std::vector<LatentVector>& latents,
                              const hazard::QuadratureRule& rule);

// Same estimator and draw sequence as marginal::log_marginal_mc, serial.
double log_marginal_mc(const Theta& theta, const Dataset& data, int S,
                       std::uint64_t seed, const hazard::QuadratureRule& rule);

}  // namespace coxmix::ref
