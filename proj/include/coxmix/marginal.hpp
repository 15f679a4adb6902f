// Monte-Carlo marginal log-likelihood and the BIC criterion for selecting
// the regularization parameter.

#pragma once

#include <cstdint>

#include "coxmix/hazard.hpp"
#include "coxmix/types.hpp"

namespace coxmix::marginal {

struct LogMarginal {
  double value = 0.0;
  double mc_se = 0.0;  // delta-method standard error of the estimate
};

// sum_i log[(1/S) sum_s g(X_i | Z_i^(s))] with Z^(s) drawn from the latent
// prior and the inner average computed by log-sum-exp. Draws for individual
// i come from substream (seed, MarginalMc, i), so the estimate is
// deterministic given the seed and independent of the thread count.
LogMarginal log_marginal_mc(const Theta& theta, const Dataset& data, int S,
                            std::uint64_t seed,
                            const hazard::QuadratureRule& rule);

struct BicRecord {
  double lambda = 0.0;
  double log_marginal = 0.0;
  double mc_se = 0.0;
  int active_count = 0;
  double bic = 0.0;  // -2 log_marginal + active_count log N, exactly
};

BicRecord bic(const Theta& theta_hat, const Dataset& data, double lambda,
              int S, std::uint64_t seed, const hazard::QuadratureRule& rule,
              double zero_tol = 1e-8);

}  // namespace coxmix::marginal
