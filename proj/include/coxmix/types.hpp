// Parameter, data, and latent-variable types shared across the library.

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace coxmix {

// Raised when a computation produces a non-finite value. Carries the index
// of the offending individual when one can be named (-1 otherwise).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg, long individual = -1)
      : std::runtime_error(individual >= 0
                               ? msg + " (individual " +
                                     std::to_string(individual) + ")"
                               : msg),
        individual_(individual) {}

  long individual() const noexcept { return individual_; }

 private:
  long individual_;
};

// Individual logistic-curve parameters (Z1, Z2, Z3). The third component is
// a fixed effect: it always equals the current mu3 and carries no density.
struct LatentVector {
  double z1 = 0.0;
  double z2 = 0.0;
  double z3 = 1.0;
};

// Full model parameter vector. The Weibull baseline (a, b) is configuration,
// fixed during estimation.
struct Theta {
  double baseline_a = 80.0;  // Weibull scale
  double baseline_b = 35.0;  // Weibull shape
  Eigen::VectorXd beta;      // Cox regression coefficients, length p
  double alpha = 0.0;        // link-function coefficient
  Eigen::Vector3d mu{0.0, 0.0, 1.0};       // latent-effect means
  Eigen::Vector2d gamma_sq{1.0, 1.0};      // diagonal latent variances
  double sigma_sq = 1.0;                   // residual variance

  int n_cov() const { return static_cast<int>(beta.size()); }

  // Throws std::invalid_argument if a positivity constraint is violated.
  void validate() const;
};

// Layout of the free-parameter vector used by the optimizer:
//   [beta_1..beta_p, alpha, mu1, mu2, mu3, log g1sq, log g2sq, log s2sq].
// Variances are optimized on the log scale; the baseline (a, b) is excluded.
struct ParamLayout {
  int p = 0;

  int dim() const { return p + 7; }
  int alpha() const { return p; }
  int mu(int k) const { return p + 1 + k; }         // k in {0,1,2}
  int log_gamma_sq(int k) const { return p + 4 + k; }  // k in {0,1}
  int log_sigma_sq() const { return p + 6; }

  static std::vector<std::string> coordinate_names(int p);
};

using FlatParams = Eigen::VectorXd;

FlatParams flatten(const Theta& theta);
Theta unflatten(const FlatParams& values, int p, double baseline_a,
                double baseline_b);

// Observed variables: a shared observation grid, the longitudinal matrix,
// event times, and the covariate matrix.
struct Dataset {
  Eigen::VectorXd obs_times;   // length J, strictly increasing
  Eigen::MatrixXd y;           // N x J
  Eigen::VectorXd survival;    // length N, positive event times
  Eigen::MatrixXd covariates;  // N x p

  int n() const { return static_cast<int>(survival.size()); }
  int n_obs() const { return static_cast<int>(obs_times.size()); }
  int n_cov() const { return static_cast<int>(covariates.cols()); }

  void validate() const;
};

inline LatentVector make_latent(double z1, double z2, double mu3) {
  return LatentVector{z1, z2, mu3};
}

// Latents at the prior mean (Z1, Z2, Z3) = (mu1, mu2, mu3) for n individuals.
std::vector<LatentVector> latents_at_prior_mean(const Theta& theta, int n);

}  // namespace coxmix
