// Logistic link, complete-data log-likelihood, and its analytic score.
//
// Per-individual terms are computed in parallel and reduced in index order,
// so results do not depend on the thread count.

#pragma once

#include <Eigen/Dense>

#include <vector>

#include "coxmix/hazard.hpp"
#include "coxmix/types.hpp"

namespace coxmix::model {

// m(t, z) = Z1 / (1 + exp((Z2 - t)/Z3)). Throws std::domain_error if Z3 = 0.
double logistic(double t, const LatentVector& z);

struct LogisticPartials {
  double d1 = 0.0;  // dm/dZ1
  double d2 = 0.0;  // dm/dZ2
  double d3 = 0.0;  // dm/dZ3
};

LogisticPartials logistic_partials(double t, const LatentVector& z);

// Individual likelihood pieces. The complete log-density of individual i is
// longitudinal + survival + latent_prior; the conditional density used by
// the marginal-likelihood estimator omits the prior term.
double longitudinal_loglik(const Theta& theta, const Dataset& data, int i,
                           const LatentVector& z);
double survival_loglik(const Theta& theta, const Dataset& data, int i,
                       const LatentVector& z,
                       const hazard::QuadratureRule& rule);
double latent_prior_loglik(const Theta& theta, const LatentVector& z);
double conditional_loglik(const Theta& theta, const Dataset& data, int i,
                          const LatentVector& z,
                          const hazard::QuadratureRule& rule);
double complete_loglik_individual(const Theta& theta, const Dataset& data,
                                  int i, const LatentVector& z,
                                  const hazard::QuadratureRule& rule);

// Sum of per-individual complete log-densities. Throws NumericError naming
// the first individual whose term is non-finite.
double complete_loglik(const Theta& theta, const Dataset& data,
                       const std::vector<LatentVector>& latents,
                       const hazard::QuadratureRule& rule);

// Score of the complete log-density of individual i with respect to the
// flat parameter coordinates (chain rule through the log-variance
// transform). The mu3 coordinate collects the fixed-effect role of Z3
// through every occurrence of m: longitudinal residuals, the hazard at the
// event time, and the cumulative hazard.
Eigen::VectorXd individual_grad(const Theta& theta, const Dataset& data, int i,
                                const LatentVector& z,
                                const hazard::QuadratureRule& rule);

// N x d matrix of per-individual scores, computed in parallel.
Eigen::MatrixXd per_individual_grads(const Theta& theta, const Dataset& data,
                                     const std::vector<LatentVector>& latents,
                                     const hazard::QuadratureRule& rule);

// Gradient of complete_loglik: column sums of per_individual_grads.
FlatParams complete_grad(const Theta& theta, const Dataset& data,
                         const std::vector<LatentVector>& latents,
                         const hazard::QuadratureRule& rule);

}  // namespace coxmix::model
