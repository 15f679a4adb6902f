#include "coxmix/hazard.hpp"

#include <cmath>
#include <limits>

#include "coxmix/model.hpp"

namespace coxmix::hazard {

QuadratureRule QuadratureRule::gauss_legendre(int order) {
  if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
  QuadratureRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);

  // Newton iteration on the Legendre polynomial, one root per symmetric pair.
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < order; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1);
      }
      dp = order * (x * p0 - p1) / (x * x - 1.0);
      const double step = p0 / dp;
      x -= step;
      if (std::abs(step) < 1e-15) break;
    }
    // Recompute the derivative at the converged root for the weight.
    double p0 = 1.0, p1 = 0.0;
    for (int j = 0; j < order; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1);
    }
    dp = order * (x * p0 - p1) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes(i) = -x;
    rule.nodes(order - 1 - i) = x;
    rule.weights(i) = w;
    rule.weights(order - 1 - i) = w;
  }
  if (order % 2 == 1) rule.nodes(order / 2) = 0.0;
  return rule;
}

double log_baseline_hazard(double t, double a, double b) {
  if (!(t > 0.0)) throw std::domain_error("baseline hazard requires t > 0");
  return std::log(b) - b * std::log(a) + (b - 1.0) * std::log(t);
}

double baseline_hazard(double t, double a, double b) {
  return std::exp(log_baseline_hazard(t, a, b));
}

double log_joint_hazard(double t, const Theta& theta,
                        const Eigen::Ref<const Eigen::VectorXd>& u_row,
                        const LatentVector& z) {
  return log_baseline_hazard(t, theta.baseline_a, theta.baseline_b) +
         theta.beta.dot(u_row) + theta.alpha * model::logistic(t, z);
}

double joint_hazard(double t, const Theta& theta,
                    const Eigen::Ref<const Eigen::VectorXd>& u_row,
                    const LatentVector& z) {
  const double log_h = log_joint_hazard(t, theta, u_row, z);
  const double h = std::exp(log_h);
  if (!std::isfinite(h)) {
    throw NumericError("joint hazard overflow, log h = " +
                       std::to_string(log_h));
  }
  return h;
}

HazardIntegrals hazard_integrals(double t, const Theta& theta,
                                 const Eigen::Ref<const Eigen::VectorXd>& u_row,
                                 const LatentVector& z,
                                 const QuadratureRule& rule) {
  if (!(t > 0.0)) throw std::domain_error("cumulative hazard requires t > 0");
  const double half = 0.5 * t;
  const double log_base_const = std::log(theta.baseline_b) -
                                theta.baseline_b * std::log(theta.baseline_a);
  const double linear = theta.beta.dot(u_row);

  HazardIntegrals out;
  for (int l = 0; l < rule.order(); ++l) {
    const double s = half * (rule.nodes(l) + 1.0);
    const double m = model::logistic(s, z);
    const double log_h = log_base_const +
                         (theta.baseline_b - 1.0) * std::log(s) + linear +
                         theta.alpha * m;
    const double h = std::exp(log_h);
    const double w = rule.weights(l) * half;
    out.cumulative += w * h;
    out.link_weighted += w * m * h;
    out.dm3_weighted += w * model::logistic_partials(s, z).d3 * h;
  }
  if (!std::isfinite(out.cumulative)) {
    throw NumericError("cumulative hazard is non-finite at t = " +
                       std::to_string(t));
  }
  return out;
}

double cumulative_hazard(double t, const Theta& theta,
                         const Eigen::Ref<const Eigen::VectorXd>& u_row,
                         const LatentVector& z, const QuadratureRule& rule) {
  if (!(t > 0.0)) throw std::domain_error("cumulative hazard requires t > 0");
  const double half = 0.5 * t;
  const double log_base_const = std::log(theta.baseline_b) -
                                theta.baseline_b * std::log(theta.baseline_a);
  const double linear = theta.beta.dot(u_row);
  double sum = 0.0;
  for (int l = 0; l < rule.order(); ++l) {
    const double s = half * (rule.nodes(l) + 1.0);
    const double log_h = log_base_const +
                         (theta.baseline_b - 1.0) * std::log(s) + linear +
                         theta.alpha * model::logistic(s, z);
    sum += rule.weights(l) * std::exp(log_h);
  }
  const double value = half * sum;
  if (!std::isfinite(value)) {
    throw NumericError("cumulative hazard is non-finite at t = " +
                       std::to_string(t));
  }
  return value;
}

double sample_survival_time(const Theta& theta,
                            const Eigen::Ref<const Eigen::VectorXd>& u_row,
                            const LatentVector& z, double uniform_draw,
                            const QuadratureRule& rule, double t_max_factor) {
  if (!(uniform_draw > 0.0) || !(uniform_draw < 1.0)) {
    throw std::domain_error("uniform draw must lie strictly in (0, 1)");
  }
  const double target = -std::log(uniform_draw);
  const double t_max = t_max_factor * theta.baseline_a;

  auto H = [&](double t) {
    return cumulative_hazard(t, theta, u_row, z, rule);
  };

  // Bracket the root; H is monotone nondecreasing.
  double hi = theta.baseline_a;
  double h_hi = H(hi);
  while (h_hi < target) {
    hi *= 1.25;
    if (hi > t_max) {
      throw NumericError("survival sampler saturated at t_max = " +
                         std::to_string(t_max) +
                         "; cumulative hazard never reaches the target");
    }
    h_hi = H(hi);
  }
  double lo = hi / 1.25;
  while (H(lo) > target) {
    lo *= 0.5;
    if (lo < 1e-300) break;
  }

  const double tol = 1e-8 * std::max(1.0, std::abs(target));
  double t = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double value = H(t) - target;
    if (std::abs(value) < tol) break;
    if (value > 0.0) {
      hi = t;
    } else {
      lo = t;
    }
    // Newton step when it stays inside the bracket, bisection otherwise.
    const double slope = joint_hazard(t, theta, u_row, z);
    double next = t - value / slope;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    t = next;
  }
  if (!(std::abs(H(t) - target) < tol)) {
    throw NumericError("survival sampler did not reach tolerance");
  }
  return t;
}

}  // namespace coxmix::hazard
