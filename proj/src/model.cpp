#include "coxmix/model.hpp"

#include <cmath>

#include "coxmix/parallel.hpp"

namespace coxmix::model {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double gaussian_loglik(double x, double mean, double variance) {
  const double r = x - mean;
  return -0.5 * (kLog2Pi + std::log(variance)) - r * r / (2.0 * variance);
}

void check_latent(const Theta& theta, const LatentVector& z, int i) {
  if (z.z3 != theta.mu(2)) {
    throw std::invalid_argument(
        "latent third component must equal mu3 (individual " +
        std::to_string(i) + ")");
  }
}

}  // namespace

double logistic(double t, const LatentVector& z) {
  if (z.z3 == 0.0) throw std::domain_error("logistic growth rate Z3 is zero");
  return z.z1 / (1.0 + std::exp((z.z2 - t) / z.z3));
}

LogisticPartials logistic_partials(double t, const LatentVector& z) {
  if (z.z3 == 0.0) throw std::domain_error("logistic growth rate Z3 is zero");
  const double w = (z.z2 - t) / z.z3;
  const double e = std::exp(w);
  const double denom = 1.0 + e;
  LogisticPartials out;
  out.d1 = 1.0 / denom;
  out.d2 = -z.z1 * e / (denom * denom * z.z3);
  out.d3 = z.z1 * e * w / (denom * denom * z.z3);
  return out;
}

double longitudinal_loglik(const Theta& theta, const Dataset& data, int i,
                           const LatentVector& z) {
  double sum = 0.0;
  for (int j = 0; j < data.n_obs(); ++j) {
    sum += gaussian_loglik(data.y(i, j), logistic(data.obs_times(j), z),
                           theta.sigma_sq);
  }
  return sum;
}

double survival_loglik(const Theta& theta, const Dataset& data, int i,
                       const LatentVector& z,
                       const hazard::QuadratureRule& rule) {
  const auto u_row = data.covariates.row(i).transpose();
  const double t = data.survival(i);
  // Uncensored event log-density: log h(T) - H(T).
  return hazard::log_joint_hazard(t, theta, u_row, z) -
         hazard::cumulative_hazard(t, theta, u_row, z, rule);
}

double latent_prior_loglik(const Theta& theta, const LatentVector& z) {
  // The degenerate third coordinate contributes no density term.
  return gaussian_loglik(z.z1, theta.mu(0), theta.gamma_sq(0)) +
         gaussian_loglik(z.z2, theta.mu(1), theta.gamma_sq(1));
}

double conditional_loglik(const Theta& theta, const Dataset& data, int i,
                          const LatentVector& z,
                          const hazard::QuadratureRule& rule) {
  return longitudinal_loglik(theta, data, i, z) +
         survival_loglik(theta, data, i, z, rule);
}

double complete_loglik_individual(const Theta& theta, const Dataset& data,
                                  int i, const LatentVector& z,
                                  const hazard::QuadratureRule& rule) {
  return conditional_loglik(theta, data, i, z, rule) +
         latent_prior_loglik(theta, z);
}

double complete_loglik(const Theta& theta, const Dataset& data,
                       const std::vector<LatentVector>& latents,
                       const hazard::QuadratureRule& rule) {
  const int N = data.n();
  if (static_cast<int>(latents.size()) != N) {
    throw std::invalid_argument("latent list length does not match dataset");
  }
  for (int i = 0; i < N; ++i) check_latent(theta, latents[i], i);

  Eigen::VectorXd terms(N);
  parallel_for(N, [&](std::int64_t i) {
    double value;
    try {
      value = complete_loglik_individual(theta, data, static_cast<int>(i),
                                         latents[i], rule);
    } catch (const std::exception&) {
      value = std::numeric_limits<double>::quiet_NaN();
    }
    terms(i) = value;
  });

  double total = 0.0;
  for (int i = 0; i < N; ++i) {
    if (!std::isfinite(terms(i))) {
      throw NumericError("complete log-likelihood term is non-finite", i);
    }
    total += terms(i);
  }
  return total;
}

Eigen::VectorXd individual_grad(const Theta& theta, const Dataset& data, int i,
                                const LatentVector& z,
                                const hazard::QuadratureRule& rule) {
  const ParamLayout layout{data.n_cov()};
  Eigen::VectorXd g = Eigen::VectorXd::Zero(layout.dim());

  const auto u_row = data.covariates.row(i).transpose();
  const double t_event = data.survival(i);
  const auto integrals = hazard::hazard_integrals(t_event, theta, u_row, z, rule);
  const double m_event = logistic(t_event, z);
  const double dm3_event = logistic_partials(t_event, z).d3;

  // Cox coefficients: U_ik (1 - H(T_i)).
  g.head(layout.p) = u_row * (1.0 - integrals.cumulative);

  // Link coefficient: m(T_i) - int m h.
  g(layout.alpha()) = m_event - integrals.link_weighted;

  // Latent means (prior terms only; the third coordinate is degenerate).
  g(layout.mu(0)) = (z.z1 - theta.mu(0)) / theta.gamma_sq(0);
  g(layout.mu(1)) = (z.z2 - theta.mu(1)) / theta.gamma_sq(1);

  // mu3 acts as the fixed third logistic parameter through every m(.)
  // occurrence; log-variance coordinates carry the chain-rule factor.
  double dmu3 = theta.alpha * (dm3_event - integrals.dm3_weighted);
  double dlog_sigma = 0.0;
  for (int j = 0; j < data.n_obs(); ++j) {
    const double t = data.obs_times(j);
    const double r = data.y(i, j) - logistic(t, z);
    dmu3 += r / theta.sigma_sq * logistic_partials(t, z).d3;
    dlog_sigma += -0.5 + r * r / (2.0 * theta.sigma_sq);
  }
  g(layout.mu(2)) = dmu3;
  g(layout.log_sigma_sq()) = dlog_sigma;

  g(layout.log_gamma_sq(0)) =
      -0.5 + (z.z1 - theta.mu(0)) * (z.z1 - theta.mu(0)) /
                 (2.0 * theta.gamma_sq(0));
  g(layout.log_gamma_sq(1)) =
      -0.5 + (z.z2 - theta.mu(1)) * (z.z2 - theta.mu(1)) /
                 (2.0 * theta.gamma_sq(1));
  return g;
}

Eigen::MatrixXd per_individual_grads(const Theta& theta, const Dataset& data,
                                     const std::vector<LatentVector>& latents,
                                     const hazard::QuadratureRule& rule) {
  const int N = data.n();
  if (static_cast<int>(latents.size()) != N) {
    throw std::invalid_argument("latent list length does not match dataset");
  }
  for (int i = 0; i < N; ++i) check_latent(theta, latents[i], i);

  const ParamLayout layout{data.n_cov()};
  Eigen::MatrixXd grads(N, layout.dim());
  Eigen::VectorXi bad = Eigen::VectorXi::Zero(N);
  parallel_for(N, [&](std::int64_t i) {
    try {
      grads.row(i) =
          individual_grad(theta, data, static_cast<int>(i), latents[i], rule)
              .transpose();
      if (!grads.row(i).allFinite()) bad(i) = 1;
    } catch (const std::exception&) {
      bad(i) = 1;
    }
  });
  for (int i = 0; i < N; ++i) {
    if (bad(i)) throw NumericError("score is non-finite", i);
  }
  return grads;
}

FlatParams complete_grad(const Theta& theta, const Dataset& data,
                         const std::vector<LatentVector>& latents,
                         const hazard::QuadratureRule& rule) {
  const Eigen::MatrixXd grads =
      per_individual_grads(theta, data, latents, rule);
  // Fixed-order reduction over individuals.
  FlatParams total = Eigen::VectorXd::Zero(grads.cols());
  for (int i = 0; i < grads.rows(); ++i) total += grads.row(i).transpose();
  return total;
}

}  // namespace coxmix::model
