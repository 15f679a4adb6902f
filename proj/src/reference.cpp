// Straight-line serial transcription of the model density and score.
// Intentionally shares no kernel code with model.cpp / hazard.cpp beyond
// the basic types and the quadrature node table.

#include "coxmix/reference.hpp"

#include <cmath>

#include "coxmix/rng.hpp"

namespace coxmix::ref {

namespace {

double curve(double t, double z1, double z2, double z3) {
  return z1 / (1.0 + std::exp((z2 - t) / z3));
}

double curve_dz3(double t, double z1, double z2, double z3) {
  const double w = (z2 - t) / z3;
  const double e = std::exp(w);
  return z1 * e * w / ((1.0 + e) * (1.0 + e) * z3);
}

double norm_logpdf(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * M_PI * var) -
         (x - mean) * (x - mean) / (2.0 * var);
}

double log_hazard_at(const Theta& th, const Eigen::VectorXd& u, double z1,
                     double z2, double z3, double t) {
  double lin = 0.0;
  for (int k = 0; k < th.n_cov(); ++k) lin += th.beta(k) * u(k);
  return std::log(th.baseline_b) - th.baseline_b * std::log(th.baseline_a) +
         (th.baseline_b - 1.0) * std::log(t) + lin +
         th.alpha * curve(t, z1, z2, z3);
}

double cumulative(const Theta& th, const Eigen::VectorXd& u, double z1,
                  double z2, double z3, double t,
                  const hazard::QuadratureRule& rule) {
  double sum = 0.0;
  for (int l = 0; l < rule.order(); ++l) {
    const double s = 0.5 * t * (rule.nodes(l) + 1.0);
    sum += rule.weights(l) * std::exp(log_hazard_at(th, u, z1, z2, z3, s));
  }
  return 0.5 * t * sum;
}

double individual_loglik(const Theta& th, const Dataset& data, int i,
                         const LatentVector& z,
                         const hazard::QuadratureRule& rule) {
  const double z1 = z.z1, z2 = z.z2, z3 = z.z3;
  double ll = 0.0;
  for (int j = 0; j < data.n_obs(); ++j) {
    ll += norm_logpdf(data.y(i, j), curve(data.obs_times(j), z1, z2, z3),
                      th.sigma_sq);
  }
  const Eigen::VectorXd u = data.covariates.row(i).transpose();
  const double t = data.survival(i);
  ll += log_hazard_at(th, u, z1, z2, z3, t);
  ll -= cumulative(th, u, z1, z2, z3, t, rule);
  ll += norm_logpdf(z1, th.mu(0), th.gamma_sq(0));
  ll += norm_logpdf(z2, th.mu(1), th.gamma_sq(1));
  return ll;
}

}  // namespace

double complete_loglik(const Theta& theta, const Dataset& data,
                       const std::vector<LatentVector>& latents,
                       const hazard::QuadratureRule& rule) {
  double total = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    total += individual_loglik(theta, data, i, latents[i], rule);
  }
  return total;
}

Eigen::MatrixXd per_individual_grads(const Theta& theta, const Dataset& data,
                                     const std::vector<LatentVector>& latents,
                                     const hazard::QuadratureRule& rule) {
  const int p = data.n_cov();
  const int d = p + 7;
  Eigen::MatrixXd grads = Eigen::MatrixXd::Zero(data.n(), d);

  for (int i = 0; i < data.n(); ++i) {
    const double z1 = latents[i].z1, z2 = latents[i].z2, z3 = latents[i].z3;
    const Eigen::VectorXd u = data.covariates.row(i).transpose();
    const double t_event = data.survival(i);

    const double big_h = cumulative(theta, u, z1, z2, z3, t_event, rule);
    double int_mh = 0.0, int_d3h = 0.0;
    for (int l = 0; l < rule.order(); ++l) {
      const double s = 0.5 * t_event * (rule.nodes(l) + 1.0);
      const double h = std::exp(log_hazard_at(theta, u, z1, z2, z3, s));
      int_mh += 0.5 * t_event * rule.weights(l) * curve(s, z1, z2, z3) * h;
      int_d3h +=
          0.5 * t_event * rule.weights(l) * curve_dz3(s, z1, z2, z3) * h;
    }

    for (int k = 0; k < p; ++k) grads(i, k) = u(k) * (1.0 - big_h);
    grads(i, p) = curve(t_event, z1, z2, z3) - int_mh;
    grads(i, p + 1) = (z1 - theta.mu(0)) / theta.gamma_sq(0);
    grads(i, p + 2) = (z2 - theta.mu(1)) / theta.gamma_sq(1);

    double dmu3 =
        theta.alpha * (curve_dz3(t_event, z1, z2, z3) - int_d3h);
    double dls = 0.0;
    for (int j = 0; j < data.n_obs(); ++j) {
      const double tj = data.obs_times(j);
      const double r = data.y(i, j) - curve(tj, z1, z2, z3);
      dmu3 += r / theta.sigma_sq * curve_dz3(tj, z1, z2, z3);
      dls += -0.5 + r * r / (2.0 * theta.sigma_sq);
    }
    grads(i, p + 3) = dmu3;
    grads(i, p + 4) = -0.5 + (z1 - theta.mu(0)) * (z1 - theta.mu(0)) /
                                 (2.0 * theta.gamma_sq(0));
    grads(i, p + 5) = -0.5 + (z2 - theta.mu(1)) * (z2 - theta.mu(1)) /
                                 (2.0 * theta.gamma_sq(1));
    grads(i, p + 6) = dls;
  }
  return grads;
}

Eigen::VectorXd complete_grad(const Theta& theta, const Dataset& data,
                              const std::vector<LatentVector>& latents,
                              const hazard::QuadratureRule& rule) {
  const Eigen::MatrixXd grads =
      per_individual_grads(theta, data, latents, rule);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(grads.cols());
  for (int i = 0; i < grads.rows(); ++i) total += grads.row(i).transpose();
  return total;
}

double log_marginal_mc(const Theta& theta, const Dataset& data, int S,
                       std::uint64_t seed,
                       const hazard::QuadratureRule& rule) {
  double total = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    RngStream rng(derive_seed(seed, Stream::MarginalMc,
                              static_cast<std::uint64_t>(i)));
    const Eigen::VectorXd u = data.covariates.row(i).transpose();
    std::vector<double> logs(S);
    double top = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < S; ++s) {
      const double z1 = theta.mu(0) + std::sqrt(theta.gamma_sq(0)) * rng.normal();
      const double z2 = theta.mu(1) + std::sqrt(theta.gamma_sq(1)) * rng.normal();
      const double z3 = theta.mu(2);
      double ll = 0.0;
      for (int j = 0; j < data.n_obs(); ++j) {
        ll += norm_logpdf(data.y(i, j), curve(data.obs_times(j), z1, z2, z3),
                          theta.sigma_sq);
      }
      ll += log_hazard_at(theta, u, z1, z2, z3, data.survival(i));
      ll -= cumulative(theta, u, z1, z2, z3, data.survival(i), rule);
      logs[s] = ll;
      if (ll > top) top = ll;
    }
    double acc = 0.0;
    for (int s = 0; s < S; ++s) acc += std::exp(logs[s] - top);
    total += top + std::log(acc / S);
  }
  return total;
}

}  // namespace coxmix::ref
