#include "coxmix/marginal.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "coxmix/model.hpp"
#include "coxmix/optimizer.hpp"
#include "coxmix/parallel.hpp"
#include "coxmix/rng.hpp"

namespace coxmix::marginal {

LogMarginal log_marginal_mc(const Theta& theta, const Dataset& data, int S,
                            std::uint64_t seed,
                            const hazard::QuadratureRule& rule) {
  if (S < 1) throw std::invalid_argument("sample count S must be >= 1");
  const int N = data.n();
  const double sd1 = std::sqrt(theta.gamma_sq(0));
  const double sd2 = std::sqrt(theta.gamma_sq(1));

  Eigen::VectorXd value(N);
  Eigen::VectorXd variance(N);
  Eigen::VectorXi degenerate = Eigen::VectorXi::Zero(N);

  parallel_for(N, [&](std::int64_t i) {
    RngStream rng(derive_seed(seed, Stream::MarginalMc,
                              static_cast<std::uint64_t>(i)));
    std::vector<double> logs(S);
    double top = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < S; ++s) {
      const LatentVector z{theta.mu(0) + sd1 * rng.normal(),
                           theta.mu(1) + sd2 * rng.normal(), theta.mu(2)};
      double ll;
      try {
        ll = model::conditional_loglik(theta, data, static_cast<int>(i), z,
                                       rule);
      } catch (const std::exception&) {
        ll = -std::numeric_limits<double>::infinity();
      }
      logs[s] = ll;
      if (ll > top) top = ll;
    }
    if (!std::isfinite(top)) {
      degenerate(i) = 1;
      return;
    }
    // log-sum-exp for the inner average; delta-method variance of the log.
    double sum = 0.0, sum_sq = 0.0;
    for (int s = 0; s < S; ++s) {
      const double w = std::exp(logs[s] - top);
      sum += w;
      sum_sq += w * w;
    }
    const double mean = sum / S;
    value(i) = top + std::log(mean);
    const double var_w = sum_sq / S - mean * mean;
    variance(i) = var_w / (S * mean * mean);
  });

  LogMarginal out;
  double var_total = 0.0;
  for (int i = 0; i < N; ++i) {
    if (degenerate(i)) {
      throw NumericError(
          "all Monte-Carlo draws give zero conditional density", i);
    }
    out.value += value(i);
    var_total += std::max(variance(i), 0.0);
  }
  out.mc_se = std::sqrt(var_total);
  return out;
}

BicRecord bic(const Theta& theta_hat, const Dataset& data, double lambda,
              int S, std::uint64_t seed, const hazard::QuadratureRule& rule,
              double zero_tol) {
  if (zero_tol < 0.0) throw std::invalid_argument("zero_tol must be >= 0");
  const LogMarginal lm = log_marginal_mc(theta_hat, data, S, seed, rule);
  BicRecord record;
  record.lambda = lambda;
  record.log_marginal = lm.value;
  record.mc_se = lm.mc_se;
  record.active_count =
      static_cast<int>(optimizer::active_set(theta_hat.beta, zero_tol).size());
  record.bic = -2.0 * lm.value +
               record.active_count * std::log(static_cast<double>(data.n()));
  return record;
}

}  // namespace coxmix::marginal
