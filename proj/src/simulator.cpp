#include "coxmix/simulator.hpp"

#include <cmath>

#include "coxmix/hazard.hpp"
#include "coxmix/model.hpp"
#include "coxmix/parallel.hpp"
#include "coxmix/rng.hpp"

namespace coxmix::simulator {

Theta study_theta(int n_cov) {
  Theta theta;
  theta.baseline_a = 80.0;
  theta.baseline_b = 35.0;
  theta.beta = Eigen::VectorXd::Zero(n_cov);
  if (n_cov > 0) theta.beta(0) = -2.0;
  if (n_cov > 1) theta.beta(1) = -1.0;
  if (n_cov > 2) theta.beta(2) = 1.0;
  if (n_cov > 3) theta.beta(3) = 2.0;
  theta.alpha = 11.11;
  theta.mu << 0.3, 90.0, 7.5;
  theta.gamma_sq << 2.5e-3, 20.0;
  theta.sigma_sq = 1e-3;
  return theta;
}

SimConfig study_config(std::uint64_t seed) {
  SimConfig config;
  config.n = 100;
  config.n_obs = 20;
  config.n_cov = 100;
  config.theta_true = study_theta(100);
  config.seed = seed;
  return config;
}

void SimConfig::validate() const {
  if (n < 1) throw std::invalid_argument("individual count N must be >= 1");
  if (n_obs < 1) {
    throw std::invalid_argument("observation count J must be >= 1");
  }
  if (n_cov < 0) throw std::invalid_argument("covariate count p must be >= 0");
  if (theta_true.n_cov() != n_cov) {
    throw std::invalid_argument("theta_true.beta length must equal p");
  }
  if (custom_grid.size() == 0 && !(t_end > t_start)) {
    throw std::invalid_argument("observation window must satisfy end > start");
  }
  if (custom_grid.size() > 0 &&
      custom_grid.size() != static_cast<Eigen::Index>(n_obs)) {
    throw std::invalid_argument("custom grid length must equal J");
  }
  if (!(cov_high >= cov_low)) {
    throw std::invalid_argument("covariate bounds are inverted");
  }
  if (theta_true.sigma_sq < 0.0) {
    throw std::invalid_argument("residual variance must be >= 0");
  }
}

Eigen::VectorXd SimConfig::obs_grid() const {
  if (custom_grid.size() > 0) return custom_grid;
  Eigen::VectorXd grid(n_obs);
  if (n_obs == 1) {
    grid(0) = t_start;
    return grid;
  }
  for (int j = 0; j < n_obs; ++j) {
    grid(j) = t_start + (t_end - t_start) * j / (n_obs - 1.0);
  }
  return grid;
}

SimResult simulate(const SimConfig& config) {
  config.validate();
  const Theta& theta = config.theta_true;
  const int N = config.n, J = config.n_obs, p = config.n_cov;
  const auto rule =
      hazard::QuadratureRule::gauss_legendre(config.quadrature_order);

  SimResult result;
  result.data.obs_times = config.obs_grid();
  result.data.y.resize(N, J);
  result.data.survival.resize(N);
  result.data.covariates.resize(N, p);
  result.latents.resize(N);
  result.uniform_draws.resize(N);

  const double noise_sd = std::sqrt(theta.sigma_sq);
  const double sd1 = std::sqrt(theta.gamma_sq(0));
  const double sd2 = std::sqrt(theta.gamma_sq(1));

  Eigen::VectorXi failed = Eigen::VectorXi::Zero(N);
  parallel_for(N, [&](std::int64_t i) {
    const auto idx = static_cast<std::uint64_t>(i);
    RngStream latent_rng(derive_seed(config.seed, Stream::SimLatent, idx));
    RngStream cov_rng(derive_seed(config.seed, Stream::SimCovariate, idx));
    RngStream surv_rng(derive_seed(config.seed, Stream::SimSurvival, idx));

    const LatentVector z{theta.mu(0) + sd1 * latent_rng.normal(),
                         theta.mu(1) + sd2 * latent_rng.normal(),
                         theta.mu(2)};
    result.latents[i] = z;

    for (int j = 0; j < J; ++j) {
      result.data.y(i, j) = model::logistic(result.data.obs_times(j), z) +
                            noise_sd * latent_rng.normal();
    }
    for (int k = 0; k < p; ++k) {
      result.data.covariates(i, k) =
          cov_rng.uniform(config.cov_low, config.cov_high);
    }
    const double u = surv_rng.uniform();
    result.uniform_draws(i) = u;
    try {
      result.data.survival(i) = hazard::sample_survival_time(
          theta, result.data.covariates.row(i).transpose(), z, u, rule);
    } catch (const std::exception&) {
      failed(i) = 1;
    }
  });

  for (int i = 0; i < N; ++i) {
    if (failed(i)) {
      throw NumericError("survival sampling failed", i);
    }
  }
  if (!result.data.y.allFinite()) {
    throw NumericError("simulated longitudinal matrix has non-finite entries");
  }
  return result;
}

}  // namespace coxmix::simulator
