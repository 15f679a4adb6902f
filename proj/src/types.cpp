#include "coxmix/types.hpp"

#include <cmath>

namespace coxmix {

void Theta::validate() const {
  if (!(baseline_a > 0.0) || !(baseline_b > 0.0)) {
    throw std::invalid_argument("baseline parameters must be positive");
  }
  if (!(gamma_sq(0) > 0.0) || !(gamma_sq(1) > 0.0)) {
    throw std::invalid_argument("latent variances must be positive");
  }
  if (!(sigma_sq > 0.0)) {
    throw std::invalid_argument("residual variance must be positive");
  }
  if (!beta.allFinite() || !mu.allFinite() || !std::isfinite(alpha)) {
    throw std::invalid_argument("parameters must be finite");
  }
}

std::vector<std::string> ParamLayout::coordinate_names(int p) {
  std::vector<std::string> names;
  names.reserve(p + 7);
  for (int k = 0; k < p; ++k) names.push_back("beta_" + std::to_string(k + 1));
  names.push_back("alpha");
  names.push_back("mu_1");
  names.push_back("mu_2");
  names.push_back("mu_3");
  names.push_back("log_gamma_sq_1");
  names.push_back("log_gamma_sq_2");
  names.push_back("log_sigma_sq");
  return names;
}

FlatParams flatten(const Theta& theta) {
  const ParamLayout layout{theta.n_cov()};
  FlatParams values(layout.dim());
  values.head(layout.p) = theta.beta;
  values(layout.alpha()) = theta.alpha;
  for (int k = 0; k < 3; ++k) values(layout.mu(k)) = theta.mu(k);
  for (int k = 0; k < 2; ++k) {
    values(layout.log_gamma_sq(k)) = std::log(theta.gamma_sq(k));
  }
  values(layout.log_sigma_sq()) = std::log(theta.sigma_sq);
  return values;
}

Theta unflatten(const FlatParams& values, int p, double baseline_a,
                double baseline_b) {
  const ParamLayout layout{p};
  if (values.size() != layout.dim()) {
    throw std::invalid_argument("flat parameter vector has length " +
                                std::to_string(values.size()) + ", expected " +
                                std::to_string(layout.dim()));
  }
  Theta theta;
  theta.baseline_a = baseline_a;
  theta.baseline_b = baseline_b;
  theta.beta = values.head(p);
  theta.alpha = values(layout.alpha());
  for (int k = 0; k < 3; ++k) theta.mu(k) = values(layout.mu(k));
  for (int k = 0; k < 2; ++k) {
    theta.gamma_sq(k) = std::exp(values(layout.log_gamma_sq(k)));
  }
  theta.sigma_sq = std::exp(values(layout.log_sigma_sq()));
  return theta;
}

void Dataset::validate() const {
  const int N = n();
  if (N < 1) throw std::invalid_argument("dataset has no individuals");
  if (n_obs() < 1) throw std::invalid_argument("observation grid is empty");
  if (y.rows() != N || y.cols() != n_obs()) {
    throw std::invalid_argument("longitudinal matrix dimensions inconsistent");
  }
  if (covariates.rows() != N) {
    throw std::invalid_argument("covariate matrix row count inconsistent");
  }
  for (int j = 1; j < n_obs(); ++j) {
    if (!(obs_times(j) > obs_times(j - 1))) {
      throw std::invalid_argument("observation times must strictly increase");
    }
  }
  for (int i = 0; i < N; ++i) {
    if (!(survival(i) > 0.0)) {
      throw std::invalid_argument("survival times must be positive");
    }
  }
}

std::vector<LatentVector> latents_at_prior_mean(const Theta& theta, int n) {
  std::vector<LatentVector> latents(n);
  for (auto& z : latents) {
    z = LatentVector{theta.mu(0), theta.mu(1), theta.mu(2)};
  }
  return latents;
}

}  // namespace coxmix
