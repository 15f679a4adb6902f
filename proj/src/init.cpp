#include "coxmix/init.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "coxmix/parallel.hpp"

namespace coxmix::init {

namespace {

double curve(double t, double z1, double z2, double z3) {
  return z1 / (1.0 + std::exp((z2 - t) / z3));
}

double median(std::vector<double> values) {
  const std::size_t n = values.size();
  std::nth_element(values.begin(), values.begin() + n / 2, values.end());
  double m = values[n / 2];
  if (n % 2 == 0) {
    std::nth_element(values.begin(), values.begin() + n / 2 - 1, values.end());
    m = 0.5 * (m + values[n / 2 - 1]);
  }
  return m;
}

double mad(const std::vector<double>& values, double center) {
  std::vector<double> dev(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    dev[i] = std::abs(values[i] - center);
  }
  return median(std::move(dev));
}

// Variance with samples clamped to median +- 5 MAD, so one broken curve fit
// cannot inflate the latent variances.
double robust_variance(const std::vector<double>& values) {
  const double center = median(values);
  const double spread = mad(values, center);
  const double lo = center - 5.0 * std::max(spread, 1e-12);
  const double hi = center + 5.0 * std::max(spread, 1e-12);
  double sum = 0.0, sum_sq = 0.0;
  for (double v : values) {
    const double c = std::clamp(v, lo, hi);
    sum += c;
    sum_sq += c * c;
  }
  const double n = static_cast<double>(values.size());
  return std::max(sum_sq / n - (sum / n) * (sum / n), 0.0);
}

}  // namespace

LogisticFit fit_logistic_curve(const Eigen::VectorXd& times,
                               const Eigen::VectorXd& y) {
  const int J = static_cast<int>(times.size());
  if (J < 1 || y.size() != J) {
    throw std::invalid_argument("curve fit needs matching non-empty vectors");
  }
  const double t_lo = times.minCoeff();
  const double t_hi = times.maxCoeff();
  const double range = std::max(t_hi - t_lo, 1.0);

  // Half-max heuristics for a starting point.
  const double y_max = y.maxCoeff();
  double z1 = std::max(1.05 * y_max, 1e-3);
  const double half = 0.5 * z1;
  double z2 = 0.5 * (t_lo + t_hi);
  for (int j = 1; j < J; ++j) {
    if (y(j - 1) < half && y(j) >= half) {
      const double w = (half - y(j - 1)) / std::max(y(j) - y(j - 1), 1e-12);
      z2 = times(j - 1) + w * (times(j) - times(j - 1));
      break;
    }
    if (j == J - 1 && y(j) < half) z2 = t_hi + 0.25 * range;
  }
  double z3 = range / 8.0;

  auto sse = [&](double a, double b, double c) {
    double s = 0.0;
    for (int j = 0; j < J; ++j) {
      const double r = y(j) - curve(times(j), a, b, c);
      s += r * r;
    }
    return s;
  };

  // Damped Gauss-Newton on (z1, z2, z3).
  double lambda = 1e-3;
  double current = sse(z1, z2, z3);
  for (int iter = 0; iter < 80; ++iter) {
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for (int j = 0; j < J; ++j) {
      const double w = (z2 - times(j)) / z3;
      const double e = std::exp(w);
      const double denom = 1.0 + e;
      const double m = z1 / denom;
      const double r = y(j) - m;
      Eigen::Vector3d grad;
      grad(0) = 1.0 / denom;
      grad(1) = -z1 * e / (denom * denom * z3);
      grad(2) = z1 * e * w / (denom * denom * z3);
      jtj += grad * grad.transpose();
      jtr += grad * r;
    }
    Eigen::Matrix3d damped = jtj;
    damped.diagonal().array() += lambda * (jtj.trace() / 3.0 + 1e-12);
    const Eigen::Vector3d step = damped.ldlt().solve(jtr);
    double n1 = z1 + step(0), n2 = z2 + step(1), n3 = z3 + step(2);
    // Keep the fit in the identifiable window.
    n1 = std::clamp(n1, 1e-4, 20.0 * std::max(std::abs(y_max), 1e-3));
    n2 = std::clamp(n2, t_lo - 2.0 * range, t_hi + 2.0 * range);
    n3 = std::clamp(n3, range / 200.0, 4.0 * range);
    const double proposal = sse(n1, n2, n3);
    if (proposal < current) {
      z1 = n1;
      z2 = n2;
      z3 = n3;
      if (current - proposal < 1e-14 * (1.0 + current)) break;
      current = proposal;
      lambda = std::max(lambda * 0.3, 1e-9);
    } else {
      lambda *= 10.0;
      if (lambda > 1e9) break;
    }
  }

  LogisticFit fit;
  fit.z1 = z1;
  fit.z2 = z2;
  fit.z3 = z3;
  fit.sigma_sq = current / J;
  return fit;
}

DataInit compute_data_init(const Dataset& data) {
  const int N = data.n();
  std::vector<LogisticFit> fits(N);
  parallel_for(N, [&](std::int64_t i) {
    fits[i] = fit_logistic_curve(data.obs_times, data.y.row(i).transpose());
  });

  std::vector<double> z1(N), z2(N), z3(N), s2(N);
  for (int i = 0; i < N; ++i) {
    z1[i] = fits[i].z1;
    z2[i] = fits[i].z2;
    z3[i] = fits[i].z3;
    s2[i] = fits[i].sigma_sq;
  }

  DataInit out;
  out.mu0 << median(z1), median(z2), median(z3);
  out.gamma_sq0 << std::max(robust_variance(z1), 1e-8),
      std::max(robust_variance(z2), 1e-4);
  out.sigma_sq0 = std::max(median(s2), 1e-10);
  out.latents.resize(N, 2);
  const double z1_lo = out.mu0(0) - 6.0 * std::sqrt(out.gamma_sq0(0));
  const double z1_hi = out.mu0(0) + 6.0 * std::sqrt(out.gamma_sq0(0));
  const double z2_lo = out.mu0(1) - 6.0 * std::sqrt(out.gamma_sq0(1));
  const double z2_hi = out.mu0(1) + 6.0 * std::sqrt(out.gamma_sq0(1));
  for (int i = 0; i < N; ++i) {
    out.latents(i, 0) = std::clamp(z1[i], z1_lo, z1_hi);
    out.latents(i, 1) = std::clamp(z2[i], z2_lo, z2_hi);
  }
  return out;
}

}  // namespace coxmix::init
