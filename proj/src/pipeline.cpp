#include "coxmix/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "coxmix/init.hpp"
#include "coxmix/model.hpp"
#include "coxmix/parallel.hpp"

namespace coxmix::pipeline {

Theta InitConfig::draw(int p, double baseline_a, double baseline_b,
                       RngStream& rng) const {
  Theta theta;
  theta.baseline_a = baseline_a;
  theta.baseline_b = baseline_b;
  theta.beta.resize(p);
  for (int k = 0; k < p; ++k) theta.beta(k) = rng.uniform(-1.0, 1.0);
  auto jittered = [&](double v) {
    return jitter > 0.0 ? v * (1.0 + rng.uniform(-jitter, jitter)) : v;
  };
  theta.alpha = jittered(alpha0);
  for (int k = 0; k < 3; ++k) theta.mu(k) = jittered(mu0(k));
  for (int k = 0; k < 2; ++k) theta.gamma_sq(k) = jittered(gamma_sq0(k));
  theta.sigma_sq = jittered(sigma_sq0);
  return theta;
}

StartingPoint make_start(const Dataset& data, const InitConfig& init,
                         double baseline_a, double baseline_b,
                         RngStream& rng) {
  StartingPoint start;
  if (!init.data_driven) {
    start.theta0 =
        init.draw(data.n_cov(), baseline_a, baseline_b, rng);
    start.latents.resize(data.n(), 2);
    for (int i = 0; i < data.n(); ++i) {
      start.latents(i, 0) = start.theta0.mu(0);
      start.latents(i, 1) = start.theta0.mu(1);
    }
    return start;
  }

  const auto fits = coxmix::init::compute_data_init(data);
  Theta theta;
  theta.baseline_a = baseline_a;
  theta.baseline_b = baseline_b;
  theta.beta.resize(data.n_cov());
  for (int k = 0; k < data.n_cov(); ++k) theta.beta(k) = rng.uniform(-1.0, 1.0);
  auto jittered = [&](double v) {
    return init.jitter > 0.0 ? v * (1.0 + rng.uniform(-init.jitter, init.jitter))
                             : v;
  };
  theta.alpha = jittered(init.alpha0);
  theta.mu(0) = jittered(fits.mu0(0));
  // The midpoint is displaced additively within one transition width, so
  // the start stays inside the identifiable window.
  theta.mu(1) =
      fits.mu0(1) +
      (init.jitter > 0.0 ? rng.uniform(-init.jitter, init.jitter) * fits.mu0(2)
                         : 0.0);
  theta.mu(2) = jittered(fits.mu0(2));
  for (int k = 0; k < 2; ++k) theta.gamma_sq(k) = jittered(fits.gamma_sq0(k));
  theta.sigma_sq = jittered(fits.sigma_sq0);
  start.theta0 = theta;
  start.latents = fits.latents;
  return start;
}

namespace {

std::vector<LatentVector> latents_from_matrix(const Eigen::MatrixX2d& m,
                                              double mu3) {
  std::vector<LatentVector> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out[i] = LatentVector{m(i, 0), m(i, 1), mu3};
  }
  return out;
}

}  // namespace

std::vector<double> auto_lambda_grid(const Dataset& data, const Theta& theta0,
                                     int size, double ratio,
                                     const optimizer::SpgOptions& options,
                                     const Eigen::MatrixX2d* start_latents) {
  if (size < 1) throw std::invalid_argument("grid size must be >= 1");
  if (!(ratio > 1.0)) throw std::invalid_argument("grid ratio must be > 1");
  const int p = data.n_cov();
  if (p == 0) return {0.0};

  // Preconditioned score scale at beta = 0: the beta forward step is
  // v_k / (FIM_kk + damping), so a threshold above its largest magnitude
  // zeroes the full vector on the first fit.
  Theta pilot = theta0;
  pilot.beta = Eigen::VectorXd::Zero(p);
  const auto rule =
      hazard::QuadratureRule::gauss_legendre(options.quadrature_order);
  const Eigen::MatrixXd grads = model::per_individual_grads(
      pilot, data, start_latents != nullptr
                       ? latents_from_matrix(*start_latents, pilot.mu(2))
                       : latents_at_prior_mean(pilot, data.n()),
      rule);
  const Eigen::VectorXd v = grads.colwise().mean().transpose();
  const Eigen::VectorXd diag =
      grads.cwiseProduct(grads).colwise().mean().transpose();
  const double beta_scale = diag.head(p).mean() + options.damping;
  const double lambda_max = 3.0 * v.head(p).cwiseAbs().maxCoeff() / beta_scale;
  if (!(lambda_max > 0.0)) {
    throw NumericError("lambda grid calibration produced a zero score");
  }

  std::vector<double> grid(size);
  for (int g = 0; g < size; ++g) {
    const double frac = size == 1 ? 0.0 : static_cast<double>(g) / (size - 1);
    grid[g] = lambda_max * std::pow(1.0 / ratio, frac);
  }
  return grid;
}

SelectionPath fit_path(const Dataset& data, const Theta& theta0,
                       const std::vector<double>& lambda_grid,
                       std::uint64_t seed, const PipelineOptions& options,
                       const Eigen::MatrixX2d* start_latents) {
  if (lambda_grid.empty()) {
    throw std::invalid_argument("lambda grid must be non-empty");
  }
  const auto rule = hazard::QuadratureRule::gauss_legendre(
      options.select.quadrature_order);
  const std::uint64_t bic_seed = derive_seed(seed, Stream::Bic);

  SelectionPath path(lambda_grid.size());
  // Execute largest lambda first, warm-starting each fit from the previous
  // solution; entries keep the caller's grid order.
  std::vector<int> order(lambda_grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return lambda_grid[a] > lambda_grid[b];
  });

  Theta start = theta0;
  const sampler::MhState* warm = nullptr;
  sampler::MhState warm_state;
  if (start_latents != nullptr) {
    warm_state = sampler::MhState::init(theta0, *start_latents, seed);
    warm = &warm_state;
  }
  for (int idx : order) {
    PathEntry& entry = path[idx];
    entry.lambda = lambda_grid[idx];
    try {
      optimizer::FitResult fit = optimizer::spg_fim(
          data, start, entry.lambda, seed, options.select, warm);
      entry.theta_hat = flatten(fit.theta);
      entry.bic = marginal::bic(fit.theta, data, entry.lambda,
                                options.mc_samples, bic_seed, rule,
                                options.zero_tol);
      entry.support = optimizer::active_set(fit.theta.beta, options.zero_tol);
      entry.ok = true;
      start = fit.theta;
      warm_state = std::move(fit.mh);
      warm = &warm_state;
    } catch (const std::exception& e) {
      entry.ok = false;
      entry.error = e.what();
    }
  }
  return path;
}

int pick_lambda(const SelectionPath& path) {
  int best = -1;
  for (std::size_t idx = 0; idx < path.size(); ++idx) {
    if (!path[idx].ok) continue;
    if (best < 0 || path[idx].bic.bic < path[best].bic.bic ||
        (path[idx].bic.bic == path[best].bic.bic &&
         path[idx].lambda > path[best].lambda)) {
      best = static_cast<int>(idx);
    }
  }
  return best;
}

SelectResult select_and_refit(const Dataset& data, const Theta& theta0,
                              const std::vector<double>& lambda_grid,
                              std::uint64_t seed,
                              const PipelineOptions& options,
                              const Eigen::MatrixX2d* start_latents) {
  SelectResult result;
  result.path =
      fit_path(data, theta0, lambda_grid, seed, options, start_latents);
  result.chosen = pick_lambda(result.path);
  if (result.chosen < 0) {
    throw NumericError("every fit along the lambda grid failed");
  }
  const PathEntry& chosen = result.path[result.chosen];
  result.support = chosen.support;
  result.theta_lasso = chosen.theta_hat;
  result.empty_support = result.support.empty();

  // Unpenalized refit on the selected support from a fresh starting point.
  Theta start = theta0;
  for (int k = 0; k < start.n_cov(); ++k) {
    if (std::find(result.support.begin(), result.support.end(), k) ==
        result.support.end()) {
      start.beta(k) = 0.0;
    }
  }
  const std::uint64_t refit_seed = derive_seed(seed, Stream::Refit);
  sampler::MhState refit_state =
      start_latents != nullptr
          ? sampler::MhState::init(start, *start_latents, refit_seed)
          : sampler::MhState::init(start, data.n(), refit_seed);
  optimizer::FitResult refit = optimizer::sg_fim(
      data, start, result.support, refit_seed, options.refit, &refit_state);
  result.theta_refit = refit.theta;
  result.refit_trace = std::move(refit.trace);
  return result;
}

StudyReport aggregate_study(const Theta& theta_true,
                            std::vector<RunRecord> runs) {
  StudyReport report;
  report.runs = std::move(runs);
  // Canonical order makes the aggregates independent of completion order.
  std::sort(report.runs.begin(), report.runs.end(),
            [](const RunRecord& a, const RunRecord& b) { return a.run < b.run; });
  const int p = theta_true.n_cov();
  report.beta_true = theta_true.beta;
  report.beta_selection_freq = Eigen::VectorXd::Zero(p);
  report.beta_mean_refit = Eigen::VectorXd::Zero(p);
  report.beta_mean_lasso = Eigen::VectorXd::Zero(p);

  std::vector<const RunRecord*> ok_runs;
  for (const auto& run : report.runs) {
    if (run.ok) {
      ok_runs.push_back(&run);
    } else {
      ++report.failed_runs;
    }
  }

  struct Slot {
    const char* name;
    double truth;
    std::function<double(const Theta&)> get;
  };
  const std::vector<Slot> slots = {
      {"alpha", theta_true.alpha, [](const Theta& t) { return t.alpha; }},
      {"gamma_sq_1", theta_true.gamma_sq(0),
       [](const Theta& t) { return t.gamma_sq(0); }},
      {"gamma_sq_2", theta_true.gamma_sq(1),
       [](const Theta& t) { return t.gamma_sq(1); }},
      {"mu_1", theta_true.mu(0), [](const Theta& t) { return t.mu(0); }},
      {"mu_2", theta_true.mu(1), [](const Theta& t) { return t.mu(1); }},
      {"mu_3", theta_true.mu(2), [](const Theta& t) { return t.mu(2); }},
      {"sigma_sq", theta_true.sigma_sq,
       [](const Theta& t) { return t.sigma_sq; }},
  };

  for (const auto& slot : slots) {
    ParamSummary summary;
    summary.name = slot.name;
    summary.true_value = slot.truth;
    if (!ok_runs.empty()) {
      double sum = 0.0, sum_sq_err = 0.0;
      for (const auto* run : ok_runs) {
        const double est = slot.get(run->estimate);
        sum += est;
        sum_sq_err += (est - slot.truth) * (est - slot.truth);
      }
      summary.mean_estimate = sum / ok_runs.size();
      if (slot.truth != 0.0) {
        summary.rel_rmse =
            std::sqrt(sum_sq_err / ok_runs.size()) / std::abs(slot.truth);
      }
    }
    report.params.push_back(summary);
  }

  if (!ok_runs.empty()) {
    for (const auto* run : ok_runs) {
      for (int k : run->support) report.beta_selection_freq(k) += 1.0;
      report.beta_mean_refit += run->estimate.beta;
      report.beta_mean_lasso += run->beta_lasso;
    }
    report.beta_selection_freq /= static_cast<double>(ok_runs.size());
    report.beta_mean_refit /= static_cast<double>(ok_runs.size());
    report.beta_mean_lasso /= static_cast<double>(ok_runs.size());
  }
  return report;
}

StudyReport replicate_study(const StudyConfig& config, int runs,
                            std::uint64_t master_seed) {
  if (runs < 1) throw std::invalid_argument("replicate count must be >= 1");
  config.sim.validate();

  std::vector<RunRecord> records(runs);
  parallel_for(runs, [&](std::int64_t r) {
    RunRecord& record = records[r];
    record.run = static_cast<int>(r) + 1;
    record.seed = derive_seed(master_seed, Stream::Replicate,
                              static_cast<std::uint64_t>(r));
    const auto start_time = std::chrono::steady_clock::now();
    try {
      simulator::SimConfig sim = config.sim;
      sim.seed = record.seed;
      const simulator::SimResult simulated = simulator::simulate(sim);

      RngStream init_rng(derive_seed(record.seed, Stream::InitTheta));
      const StartingPoint start =
          make_start(simulated.data, config.init, sim.theta_true.baseline_a,
                     sim.theta_true.baseline_b, init_rng);

      std::vector<double> grid = config.lambda_grid;
      if (grid.empty()) {
        grid = auto_lambda_grid(simulated.data, start.theta0, config.grid_size,
                                config.grid_ratio, config.pipeline.select,
                                &start.latents);
      }
      SelectResult selected =
          select_and_refit(simulated.data, start.theta0, grid, record.seed,
                           config.pipeline, &start.latents);
      const PathEntry& chosen = selected.path[selected.chosen];
      record.lambda_m = chosen.lambda;
      record.bic = chosen.bic.bic;
      record.support = selected.support;
      record.beta_lasso = selected.theta_lasso.head(sim.n_cov);
      record.estimate = selected.theta_refit;
      record.ok = true;
    } catch (const std::exception& e) {
      record.ok = false;
      record.error = e.what();
    }
    record.elapsed_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start_time)
            .count();
  });

  return aggregate_study(config.sim.theta_true, std::move(records));
}

}  // namespace coxmix::pipeline
