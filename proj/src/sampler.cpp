#include "coxmix/sampler.hpp"

#include <cmath>
#include <limits>

#include "coxmix/model.hpp"
#include "coxmix/parallel.hpp"

namespace coxmix::sampler {

MhState MhState::init(const Theta& theta, int n, std::uint64_t seed) {
  MhState state;
  state.current.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    state.current(i, 0) = theta.mu(0);
    state.current(i, 1) = theta.mu(1);
  }
  state.proposal_sd(0) = 0.5 * std::sqrt(theta.gamma_sq(0));
  state.proposal_sd(1) = 0.5 * std::sqrt(theta.gamma_sq(1));
  state.accept_count = Eigen::ArrayXi::Zero(n);
  state.attempt_count = Eigen::ArrayXi::Zero(n);
  state.streams.reserve(n);
  for (int i = 0; i < n; ++i) {
    state.streams.emplace_back(
        derive_seed(seed, Stream::MhChain, static_cast<std::uint64_t>(i)));
  }
  return state;
}

MhState MhState::init(const Theta& theta, const Eigen::MatrixX2d& start,
                      std::uint64_t seed) {
  MhState state = init(theta, static_cast<int>(start.rows()), seed);
  state.current = start;
  return state;
}

std::vector<LatentVector> MhState::latents(double mu3) const {
  std::vector<LatentVector> out(n());
  for (int i = 0; i < n(); ++i) {
    out[i] = LatentVector{current(i, 0), current(i, 1), mu3};
  }
  return out;
}

double MhState::acceptance_rate() const {
  const long attempts = attempt_count.cast<long>().sum();
  if (attempts == 0) return 0.0;
  return static_cast<double>(accept_count.cast<long>().sum()) / attempts;
}

double MhState::window_rate() const {
  if (window_attempts == 0) return 0.0;
  return static_cast<double>(window_accepts) / window_attempts;
}

double MhState::last_sweep_rate() const {
  if (n() == 0) return 0.0;
  return static_cast<double>(last_sweep_accepts) / n();
}

void mh_step(MhState& state, const LogTarget& log_target) {
  const int N = state.n();
  const double sd1 = state.proposal_sd(0);
  const double sd2 = state.proposal_sd(1);
  Eigen::ArrayXi accepted = Eigen::ArrayXi::Zero(N);

  parallel_for(N, [&](std::int64_t i) {
    RngStream& rng = state.streams[i];
    const double z1 = state.current(i, 0);
    const double z2 = state.current(i, 1);
    const double p1 = z1 + sd1 * rng.normal();
    const double p2 = z2 + sd2 * rng.normal();
    const double u = rng.uniform();

    // Non-finite proposal density rejects; the chain never aborts. A
    // non-finite density at the current point accepts any finite proposal.
    double log_ratio = -std::numeric_limits<double>::infinity();
    double prop_ll = log_ratio;
    try {
      prop_ll = log_target(static_cast<int>(i), p1, p2);
    } catch (const std::exception&) {
    }
    if (std::isfinite(prop_ll)) {
      double cur_ll = -std::numeric_limits<double>::infinity();
      try {
        cur_ll = log_target(static_cast<int>(i), z1, z2);
      } catch (const std::exception&) {
      }
      log_ratio = std::isfinite(cur_ll)
                      ? prop_ll - cur_ll
                      : std::numeric_limits<double>::infinity();
    }
    if (std::log(u) < log_ratio) {
      state.current(i, 0) = p1;
      state.current(i, 1) = p2;
      accepted(i) = 1;
    }
  });

  state.accept_count += accepted;
  state.attempt_count += 1;
  const long sweep_accepts = accepted.cast<long>().sum();
  state.last_sweep_accepts = sweep_accepts;
  state.window_accepts += sweep_accepts;
  state.window_attempts += N;
}

void mh_step(MhState& state, const Theta& theta, const Dataset& data,
             const hazard::QuadratureRule& rule) {
  const double mu3 = theta.mu(2);
  mh_step(state, [&](int i, double z1, double z2) {
    return model::complete_loglik_individual(
        theta, data, i, LatentVector{z1, z2, mu3}, rule);
  });
}

void adapt_proposal(MhState& state, double target_rate, double kappa) {
  if (!(target_rate > 0.0) || !(target_rate < 1.0)) {
    throw std::invalid_argument("target rate must lie in (0, 1)");
  }
  if (state.window_attempts > 0) {
    const double rate = state.window_rate();
    const double factor = std::exp(kappa * (rate - target_rate));
    state.proposal_sd *= factor;
  }
  state.window_accepts = 0;
  state.window_attempts = 0;
}

}  // namespace coxmix::sampler
