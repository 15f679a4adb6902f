// One-step Metropolis-Hastings kernel targeting the conditional law of each
// individual's latent vector given its data under the current parameters.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

#include "coxmix/hazard.hpp"
#include "coxmix/rng.hpp"
#include "coxmix/types.hpp"

namespace coxmix::sampler {

// Current latent coordinates plus proposal scales, acceptance bookkeeping,
// and per-individual RNG substreams. Individuals are independent, so the
// sweep parallelizes with results identical to sequential execution.
struct MhState {
  Eigen::MatrixX2d current;          // N x 2 latent coordinates (Z1, Z2)
  Eigen::Vector2d proposal_sd;       // random-walk sd per coordinate
  Eigen::ArrayXi accept_count;       // lifetime, per individual
  Eigen::ArrayXi attempt_count;
  long window_accepts = 0;           // since the last adaptation
  long window_attempts = 0;
  long last_sweep_accepts = 0;
  std::vector<RngStream> streams;    // one per individual

  int n() const { return static_cast<int>(current.rows()); }

  // Latent coordinates start at the prior means; proposal sd at
  // sqrt(gamma_sq)/2. Substream i is derived from (seed, MhChain, i).
  static MhState init(const Theta& theta, int n, std::uint64_t seed);

  // Same, but with explicit per-individual starting coordinates.
  static MhState init(const Theta& theta, const Eigen::MatrixX2d& start,
                      std::uint64_t seed);

  std::vector<LatentVector> latents(double mu3) const;

  double acceptance_rate() const;       // lifetime
  double window_rate() const;           // since last adaptation
  double last_sweep_rate() const;
};

// Per-individual conditional log-density evaluated at candidate coordinates.
using LogTarget = std::function<double(int i, double z1, double z2)>;

// One symmetric Gaussian random-walk proposal per individual; accept with
// probability min(1, exp(l(Z') - l(Z))). Non-finite l(Z') rejects the
// proposal, never aborts the chain.
void mh_step(MhState& state, const LogTarget& log_target);

// Standard target: the complete per-individual log-density under theta,
// with Z3 pinned to mu3.
void mh_step(MhState& state, const Theta& theta, const Dataset& data,
             const hazard::QuadratureRule& rule);

// Rescales both proposal sds by exp(kappa * (window rate - target_rate)) and
// resets the window counters. Callers invoke this during warm-up only so the
// kernel is time-homogeneous once the step sizes start decaying.
void adapt_proposal(MhState& state, double target_rate, double kappa = 1.0);

}  // namespace coxmix::sampler
