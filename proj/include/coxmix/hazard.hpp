// Weibull baseline, joint hazard, cumulative hazard by Gauss-Legendre
// quadrature, and inverse-transform survival sampling.

#pragma once

#include <Eigen/Dense>

#include "coxmix/types.hpp"

namespace coxmix::hazard {

// Gauss-Legendre abscissae/weights on [-1, 1].
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  int order() const { return static_cast<int>(nodes.size()); }

  static QuadratureRule gauss_legendre(int order);
};

// Weibull hazard b a^{-b} t^{b-1}, evaluated in log space.
double baseline_hazard(double t, double a, double b);
double log_baseline_hazard(double t, double a, double b);

// log h(t) = log h_base(t) + beta'u + alpha m(t, z).
double log_joint_hazard(double t, const Theta& theta,
                        const Eigen::Ref<const Eigen::VectorXd>& u_row,
                        const LatentVector& z);
double joint_hazard(double t, const Theta& theta,
                    const Eigen::Ref<const Eigen::VectorXd>& u_row,
                    const LatentVector& z);

// H(t) = int_0^t h(s) ds, one-panel Gauss-Legendre with s = (t/2)(x+1).
double cumulative_hazard(double t, const Theta& theta,
                         const Eigen::Ref<const Eigen::VectorXd>& u_row,
                         const LatentVector& z, const QuadratureRule& rule);

// The three integrals needed by the likelihood and its score, in one pass
// over the quadrature nodes:
//   cumulative    = int_0^t h(s) ds
//   link_weighted = int_0^t m(s, z) h(s) ds
//   dm3_weighted  = int_0^t dm/dZ3(s, z) h(s) ds
struct HazardIntegrals {
  double cumulative = 0.0;
  double link_weighted = 0.0;
  double dm3_weighted = 0.0;
};

HazardIntegrals hazard_integrals(double t, const Theta& theta,
                                 const Eigen::Ref<const Eigen::VectorXd>& u_row,
                                 const LatentVector& z,
                                 const QuadratureRule& rule);

// Solves H(T) = -log(uniform_draw) by bracketing + bisection with Newton
// polish. Residual |H(T) + log u| < 1e-8 max(1, |log u|). Throws
// NumericError if no bracket exists below t_max_factor * baseline_a.
double sample_survival_time(const Theta& theta,
                            const Eigen::Ref<const Eigen::VectorXd>& u_row,
                            const LatentVector& z, double uniform_draw,
                            const QuadratureRule& rule,
                            double t_max_factor = 10.0);

}  // namespace coxmix::hazard
