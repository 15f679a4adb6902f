// Stochastic proximal gradient with Fisher-information preconditioning
// (SPG-FIM), and the SG-FIM variant without the backward step used for the
// unpenalized refit.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "coxmix/sampler.hpp"
#include "coxmix/types.hpp"

namespace coxmix::optimizer {

// gamma_k = 1 for k <= warmup, (k - warmup)^{-1} afterwards (k is 1-based).
struct StepSchedule {
  int warmup = 1100;

  double gamma(int k) const {
    return k <= warmup ? 1.0 : 1.0 / static_cast<double>(k - warmup);
  }
};

// Per-individual stochastic approximations Delta_i of the score and the
// assembled damped Fisher information matrix.
struct FimState {
  Eigen::MatrixXd delta;  // N x d
  Eigen::MatrixXd fim;    // d x d, symmetric PSD by construction
  double damping = 1e-3;

  static FimState init(int n, int d, double damping);
};

// Delta_i <- (1-gamma) Delta_i + gamma grad_i; fim <- Delta' Delta / N.
void update_fim(FimState& state, const Eigen::MatrixXd& grads, double gamma);

// Coordinatewise soft threshold: the closed-form Lasso proximal operator.
// |v| < t -> 0; v >= t -> v - t; v <= -t -> v + t.
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double threshold);
double soft_threshold(double v, double threshold);

struct IterationRecord {
  int k = 0;
  double gamma = 0.0;
  FlatParams theta;
  double grad_norm = 0.0;     // ||v_k||
  double accept_rate = 0.0;   // MH sweep acceptance this iteration
  int active_set = 0;         // nonzero beta count
  bool precond_fallback = false;
};

struct FitTrace {
  std::vector<IterationRecord> records;
  int step_clamp_events = 0;
};

// Box constraints on the flat coordinates, applied by projection after each
// iteration. The defaults are generous relative to the data scales: they
// keep the warm-up inside the region where the latent chain mixes, and are
// inactive at any interior optimum.
struct ParameterBox {
  double beta_abs = 25.0;
  double alpha_abs = 30.0;
  double mu1_lo = 1e-3, mu1_hi = 5.0;
  double mu2_lo = 0.0, mu2_hi = 250.0;
  double mu3_lo = 0.2, mu3_hi = 40.0;
  double log_var_lo = -18.0, log_var_hi = 8.0;
  bool enabled = true;

  // Returns true if any coordinate was clipped.
  bool project(Eigen::Ref<Eigen::VectorXd> flat, const ParamLayout& layout) const;
};

struct SpgOptions {
  int iterations = 2000;
  StepSchedule schedule;
  double damping = 1e-3;
  ParameterBox box;
  // Identity preconditioning for the first iterations. Zero by default: the
  // first FIM update already replaces Delta with the current scores
  // (gamma_1 = 1), and raw unit-step ascent diverges on this model.
  int identity_precond_iters = 0;
  // Solve the beta block and the remaining block separately. With p close
  // to N the joint matrix is singular and its damped near-null space mixes
  // the covariate scores into the nonlinear coordinates, which destabilizes
  // the warm-up; the block solve preconditions each part on its own scale.
  bool block_precond = true;
  // Trust region on the forward step. The coordinate cap bounds each
  // parameter's movement per unit step; without it, early iterations with
  // nearly identical per-individual scores take steps of order
  // 1/(2 sqrt(damping)) along that direction and can outrun the latent
  // chain. The norm cap is a backstop.
  double max_coord_step = 0.25;  // 0 = off
  double max_step_norm = 10.0;  // 0 = off
  double mh_target_rate = 0.4;
  int mh_adapt_interval = 50;
  int mh_steps_per_iter = 1;  // Algorithm default: a single sweep
  // Hold the beta block fixed for the first iterations while the nonlinear
  // block and the latent chain calibrate. Noise coordinates escape zero far
  // less often once the hazard residuals have settled, so the selection
  // race starts under clean conditions. Zero disables the phase.
  int beta_freeze_iters = 0;
  // Cap on the stochastic-approximation weight for the Delta recursion.
  // 1.0 reproduces the plain recursion (weight gamma_k, so no memory during
  // warm-up); smaller values keep a running average of recent scores during
  // warm-up, which suppresses sweep-level noise in the forward step and
  // gives the assembled information matrix full rank sooner.
  double delta_smoothing = 1.0;
  int quadrature_order = 64;
  double zero_tol = 1e-8;
};

struct FitResult {
  Theta theta;
  FitTrace trace;
  sampler::MhState mh;  // final latent state, reusable as a warm start
};

// Algorithm: per iteration, (1) one MH sweep; (2) v_k = mean per-individual
// score; (3) FIM stochastic-approximation update; (4) forward ascent step
// theta + gamma_k (FIM + damping I)^{-1} v_k; (5) backward step replacing
// the beta slots with soft_threshold(beta, gamma_k lambda). Deterministic
// given the seed.
FitResult spg_fim(const Dataset& data, const Theta& theta0, double lambda,
                  std::uint64_t seed, const SpgOptions& options,
                  const sampler::MhState* warm_start = nullptr);

// SPG-FIM with lambda = 0, no backward step, and beta coordinates outside
// `support` (0-based) pinned to zero with their scores masked.
FitResult sg_fim(const Dataset& data, const Theta& theta0,
                 const std::vector<int>& support, std::uint64_t seed,
                 const SpgOptions& options,
                 const sampler::MhState* warm_start = nullptr);

std::vector<int> active_set(const Eigen::VectorXd& beta, double zero_tol);

}  // namespace coxmix::optimizer
