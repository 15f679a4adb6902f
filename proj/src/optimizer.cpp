#include "coxmix/optimizer.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

#include "coxmix/model.hpp"

namespace coxmix::optimizer {

bool ParameterBox::project(Eigen::Ref<Eigen::VectorXd> flat,
                           const ParamLayout& layout) const {
  if (!enabled) return false;
  bool clipped = false;
  auto clamp = [&clipped](double& v, double lo, double hi) {
    if (v < lo) {
      v = lo;
      clipped = true;
    } else if (v > hi) {
      v = hi;
      clipped = true;
    }
  };
  for (int k = 0; k < layout.p; ++k) clamp(flat(k), -beta_abs, beta_abs);
  clamp(flat(layout.alpha()), -alpha_abs, alpha_abs);
  clamp(flat(layout.mu(0)), mu1_lo, mu1_hi);
  clamp(flat(layout.mu(1)), mu2_lo, mu2_hi);
  clamp(flat(layout.mu(2)), mu3_lo, mu3_hi);
  for (int k = 0; k < 2; ++k) {
    clamp(flat(layout.log_gamma_sq(k)), log_var_lo, log_var_hi);
  }
  clamp(flat(layout.log_sigma_sq()), log_var_lo, log_var_hi);
  return clipped;
}

FimState FimState::init(int n, int d, double damping) {
  FimState state;
  state.delta = Eigen::MatrixXd::Zero(n, d);
  state.fim = Eigen::MatrixXd::Zero(d, d);
  state.damping = damping;
  return state;
}

void update_fim(FimState& state, const Eigen::MatrixXd& grads, double gamma) {
  if (grads.rows() != state.delta.rows() ||
      grads.cols() != state.delta.cols()) {
    throw std::invalid_argument("score matrix dimensions do not match");
  }
  if (!(gamma > 0.0) || gamma > 1.0) {
    throw std::invalid_argument("gamma must lie in (0, 1]");
  }
  state.delta = (1.0 - gamma) * state.delta + gamma * grads;
  const double n = static_cast<double>(state.delta.rows());
  state.fim = state.delta.transpose() * state.delta / n;
  // Symmetry is exact up to roundoff; enforce it so factorizations see a
  // symmetric matrix.
  state.fim = 0.5 * (state.fim + state.fim.transpose()).eval();
}

double soft_threshold(double v, double threshold) {
  if (v >= threshold) return v - threshold;
  if (v <= -threshold) return v + threshold;
  return 0.0;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double threshold) {
  if (threshold < 0.0) throw std::invalid_argument("threshold must be >= 0");
  Eigen::VectorXd out(v.size());
  for (int i = 0; i < v.size(); ++i) out(i) = soft_threshold(v(i), threshold);
  return out;
}

std::vector<int> active_set(const Eigen::VectorXd& beta, double zero_tol) {
  std::vector<int> support;
  for (int k = 0; k < beta.size(); ++k) {
    if (std::abs(beta(k)) > zero_tol) support.push_back(k);
  }
  return support;
}

namespace {

struct RunSpec {
  double lambda = 0.0;
  // Empty mask means all beta coordinates are free; otherwise mask(k) == 0
  // pins beta_k to zero and masks its score.
  Eigen::VectorXd beta_mask;
  bool backward_step = true;
};

FitResult run_loop(const Dataset& data, const Theta& theta0,
                   const RunSpec& spec, std::uint64_t seed,
                   const SpgOptions& options,
                   const sampler::MhState* warm_start) {
  theta0.validate();
  data.validate();
  if (options.iterations < 1) {
    throw std::invalid_argument("iteration count must be >= 1");
  }

  const int N = data.n();
  const ParamLayout layout{data.n_cov()};
  const int d = layout.dim();
  const auto rule =
      hazard::QuadratureRule::gauss_legendre(options.quadrature_order);

  FlatParams flat = flatten(theta0);
  const bool masked = spec.beta_mask.size() > 0;
  if (masked) {
    flat.head(layout.p).array() *= spec.beta_mask.array();
  }

  sampler::MhState mh = warm_start ? *warm_start
                                   : sampler::MhState::init(theta0, N, seed);
  FimState fim = FimState::init(N, d, options.damping);

  FitTrace trace;
  trace.records.reserve(options.iterations);

  Eigen::LDLT<Eigen::MatrixXd> solver(d);
  // The beta step scale is frozen once the calibration phase ends. Letting
  // it track the shrinking residuals would lower the effective threshold
  // exactly when noise coordinates start to be absorbed, feeding the
  // absorption further.
  double locked_beta_scale = 0.0;

  for (int k = 1; k <= options.iterations; ++k) {
    const double gamma = options.schedule.gamma(k);
    const Theta theta =
        unflatten(flat, layout.p, theta0.baseline_a, theta0.baseline_b);

    // Simulation step: one MH sweep; proposal scales adapt during warm-up
    // only, so the kernel is fixed once the steps decay.
    for (int s = 0; s < options.mh_steps_per_iter; ++s) {
      sampler::mh_step(mh, theta, data, rule);
    }
    if (k < options.schedule.warmup && options.mh_adapt_interval > 0 &&
        k % options.mh_adapt_interval == 0) {
      sampler::adapt_proposal(mh, options.mh_target_rate);
    }

    // Score computation.
    Eigen::MatrixXd grads =
        model::per_individual_grads(theta, data, mh.latents(theta.mu(2)), rule);
    if (masked) {
      for (int c = 0; c < layout.p; ++c) {
        if (spec.beta_mask(c) == 0.0) grads.col(c).setZero();
      }
    }
    Eigen::VectorXd v = grads.colwise().sum().transpose() / N;

    // FIM stochastic approximation.
    update_fim(fim, grads, std::min(gamma, options.delta_smoothing));

    // The forward step uses the averaged per-individual scores. During
    // warm-up (gamma = 1) this equals the raw mean score; in the decay
    // phase it suppresses the sweep-to-sweep chain noise that would
    // otherwise keep flickering coordinates past the soft threshold.
    const Eigen::VectorXd v_step =
        fim.delta.colwise().sum().transpose() / N;

    // Forward step, ascending the log-likelihood.
    bool fallback = false;
    Eigen::VectorXd direction;
    auto damped_solve = [&](const Eigen::Ref<const Eigen::MatrixXd>& block,
                            const Eigen::Ref<const Eigen::VectorXd>& rhs,
                            Eigen::Ref<Eigen::VectorXd> out) {
      double damping = fim.damping;
      while (damping <= fim.damping * 1e6) {
        Eigen::MatrixXd damped = block;
        damped.diagonal().array() += damping;
        solver.compute(damped);
        if (solver.info() == Eigen::Success) {
          out = solver.solve(rhs);
          if (out.allFinite()) return true;
        }
        damping *= 10.0;
      }
      out = rhs;
      return false;
    };
    if (k <= options.identity_precond_iters) {
      direction = v_step;
    } else if (options.block_precond && layout.p > 0) {
      // Beta block: scalar scaling by the average curvature. The p x p
      // outer-product matrix built from N individuals is singular for p
      // near N and its damped inverse amplifies sampling noise, while
      // per-coordinate scaling distorts the signal-to-noise geometry the
      // soft threshold relies on. A common scale keeps the proximal step's
      // coordinate comparison faithful to the raw scores.
      direction.resize(d);
      // Masked columns carry zero scores; the common scale averages over
      // the live coordinates only.
      double diag_sum = 0.0;
      int live = 0;
      for (int c = 0; c < layout.p; ++c) {
        if (masked && spec.beta_mask(c) == 0.0) continue;
        diag_sum += fim.fim(c, c);
        ++live;
      }
      double beta_scale = (live > 0 ? diag_sum / live : 0.0) + fim.damping;
      if (options.beta_freeze_iters > 0) {
        if (k == options.beta_freeze_iters) locked_beta_scale = beta_scale;
        if (locked_beta_scale > 0.0) beta_scale = locked_beta_scale;
      }
      direction.head(layout.p) = v_step.head(layout.p) / beta_scale;
      const bool ok_tail = damped_solve(fim.fim.bottomRightCorner(7, 7),
                                        v_step.tail(7), direction.tail(7));
      fallback = !ok_tail;
    } else {
      direction.resize(d);
      fallback = !damped_solve(fim.fim, v_step, direction);
    }
    if (options.max_coord_step > 0.0) {
      // The cap protects the nonlinear block, whose early steps can outrun
      // the latent chain. Beta movement is governed by the proximal step,
      // and capping it would distort which coordinates can escape zero.
      bool clamped = false;
      for (int c = layout.p; c < d; ++c) {
        if (std::abs(direction(c)) > options.max_coord_step) {
          direction(c) = std::copysign(options.max_coord_step, direction(c));
          clamped = true;
        }
      }
      if (clamped) ++trace.step_clamp_events;
    }
    if (options.max_step_norm > 0.0) {
      const double norm = direction.norm();
      if (norm > options.max_step_norm) {
        direction *= options.max_step_norm / norm;
        ++trace.step_clamp_events;
      }
    }
    const bool beta_frozen = k <= options.beta_freeze_iters;
    if (beta_frozen) direction.head(layout.p).setZero();
    flat += gamma * direction;

    // Backward step: the penalty depends only on beta, so the proximal
    // operator touches the beta slots and nothing else.
    if (spec.backward_step && spec.lambda > 0.0 && !beta_frozen) {
      flat.head(layout.p) =
          soft_threshold(flat.head(layout.p).eval(), gamma * spec.lambda);
    }
    if (masked) {
      flat.head(layout.p).array() *= spec.beta_mask.array();
    }
    options.box.project(flat, layout);

    if (!flat.allFinite()) {
      throw NumericError("parameter vector became non-finite at iteration " +
                         std::to_string(k));
    }

    IterationRecord record;
    record.k = k;
    record.gamma = gamma;
    record.theta = flat;
    record.grad_norm = v.norm();
    record.accept_rate = mh.last_sweep_rate();
    record.active_set = static_cast<int>(
        active_set(flat.head(layout.p), options.zero_tol).size());
    record.precond_fallback = fallback;
    trace.records.push_back(std::move(record));
  }

  FitResult result{
      unflatten(flat, layout.p, theta0.baseline_a, theta0.baseline_b),
      std::move(trace), std::move(mh)};
  return result;
}

}  // namespace

FitResult spg_fim(const Dataset& data, const Theta& theta0, double lambda,
                  std::uint64_t seed, const SpgOptions& options,
                  const sampler::MhState* warm_start) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  RunSpec spec;
  spec.lambda = lambda;
  spec.backward_step = true;
  return run_loop(data, theta0, spec, seed, options, warm_start);
}

FitResult sg_fim(const Dataset& data, const Theta& theta0,
                 const std::vector<int>& support, std::uint64_t seed,
                 const SpgOptions& options,
                 const sampler::MhState* warm_start) {
  const int p = data.n_cov();
  RunSpec spec;
  spec.lambda = 0.0;
  spec.backward_step = false;
  spec.beta_mask = Eigen::VectorXd::Zero(p);
  for (int k : support) {
    if (k < 0 || k >= p) {
      throw std::invalid_argument("support index out of range: " +
                                  std::to_string(k));
    }
    spec.beta_mask(k) = 1.0;
  }
  return run_loop(data, theta0, spec, seed, options, warm_start);
}

}  // namespace coxmix::optimizer
