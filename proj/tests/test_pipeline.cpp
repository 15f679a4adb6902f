#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "coxmix/init.hpp"
#include "coxmix/model.hpp"
#include "coxmix/pipeline.hpp"
#include "coxmix/simulator.hpp"

using namespace coxmix;
using namespace coxmix::pipeline;

namespace {

struct TinyProblem {
  simulator::SimResult sim;
  StartingPoint start;
  PipelineOptions options;
  Theta truth;
};

TinyProblem tiny_problem(std::uint64_t seed, int n = 16, int p = 3) {
  TinyProblem problem;
  simulator::SimConfig config = simulator::study_config(seed);
  config.n = n;
  config.n_cov = p;
  config.theta_true = simulator::study_theta(p);
  problem.truth = config.theta_true;
  problem.sim = simulator::simulate(config);

  InitConfig init;
  RngStream rng(derive_seed(seed, Stream::InitTheta));
  problem.start = make_start(problem.sim.data, init, 80.0, 35.0, rng);

  problem.options.select.iterations = 300;
  problem.options.select.schedule.warmup = 200;
  problem.options.select.beta_freeze_iters = 60;
  problem.options.refit.iterations = 300;
  problem.options.refit.schedule.warmup = 200;
  problem.options.mc_samples = 120;
  return problem;
}

}  // namespace

TEST_CASE("logistic curve fit recovers noiseless parameters") {
  Eigen::VectorXd times(20);
  for (int j = 0; j < 20; ++j) times(j) = 50.0 + 60.0 * j / 19.0;
  Eigen::VectorXd y(20);
  for (int j = 0; j < 20; ++j) {
    y(j) = model::logistic(times(j), LatentVector{0.3, 90.0, 7.5});
  }
  const auto fit = init::fit_logistic_curve(times, y);
  CHECK(fit.z1 == doctest::Approx(0.3).epsilon(1e-4));
  CHECK(fit.z2 == doctest::Approx(90.0).epsilon(1e-4));
  CHECK(fit.z3 == doctest::Approx(7.5).epsilon(1e-4));
  CHECK(fit.sigma_sq < 1e-10);
}

TEST_CASE("data-driven start lands near the generating values") {
  simulator::SimConfig config = simulator::study_config(15);
  config.n = 60;
  config.n_cov = 0;
  config.theta_true = simulator::study_theta(0);
  const auto sim = simulator::simulate(config);
  const auto fits = init::compute_data_init(sim.data);
  CHECK(std::abs(fits.mu0(0) - 0.3) / 0.3 < 0.2);
  CHECK(std::abs(fits.mu0(1) - 90.0) / 90.0 < 0.05);
  CHECK(std::abs(fits.mu0(2) - 7.5) / 7.5 < 0.3);
  CHECK(fits.sigma_sq0 < 10.0 * 1e-3);
  CHECK(static_cast<int>(fits.latents.rows()) == 60);

  InitConfig manual;
  manual.data_driven = false;
  RngStream rng(4);
  const auto start = make_start(sim.data, manual, 80.0, 35.0, rng);
  CHECK(start.theta0.baseline_a == 80.0);
  for (int i = 0; i < 60; ++i) {
    CHECK(start.latents(i, 0) == start.theta0.mu(0));
    CHECK(start.latents(i, 1) == start.theta0.mu(1));
  }
}

TEST_CASE("auto lambda grid shape") {
  const TinyProblem problem = tiny_problem(23);
  const auto grid =
      auto_lambda_grid(problem.sim.data, problem.start.theta0, 12, 8.0,
                       problem.options.select, &problem.start.latents);
  REQUIRE(grid.size() == 12);
  for (std::size_t g = 1; g < grid.size(); ++g) CHECK(grid[g] < grid[g - 1]);
  CHECK(grid.front() / grid.back() == doctest::Approx(8.0).epsilon(1e-12));

  Dataset no_cov = problem.sim.data;
  no_cov.covariates.resize(no_cov.n(), 0);
  Theta theta0 = problem.start.theta0;
  theta0.beta.resize(0);
  const auto degenerate = auto_lambda_grid(no_cov, theta0, 10, 8.0,
                                           problem.options.select, nullptr);
  REQUIRE(degenerate.size() == 1);
  CHECK(degenerate[0] == 0.0);
}

TEST_CASE("a one-point path equals a direct fit plus a BIC evaluation") {
  const TinyProblem problem = tiny_problem(31);
  const std::uint64_t seed = 77;
  const double lambda = 0.4;

  const auto path =
      fit_path(problem.sim.data, problem.start.theta0, {lambda}, seed,
               problem.options, &problem.start.latents);
  REQUIRE(path.size() == 1);
  REQUIRE(path[0].ok);

  sampler::MhState start_state = sampler::MhState::init(
      problem.start.theta0, problem.start.latents, seed);
  const auto fit = optimizer::spg_fim(problem.sim.data, problem.start.theta0,
                                      lambda, seed, problem.options.select,
                                      &start_state);
  const auto rule = hazard::QuadratureRule::gauss_legendre(
      problem.options.select.quadrature_order);
  const auto record = marginal::bic(fit.theta, problem.sim.data, lambda,
                                    problem.options.mc_samples,
                                    derive_seed(seed, Stream::Bic), rule,
                                    problem.options.zero_tol);

  CHECK((path[0].theta_hat - flatten(fit.theta)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(path[0].bic.bic == record.bic);
  CHECK(path[0].bic.log_marginal == record.log_marginal);
}

TEST_CASE("two-point grids keep the caller's order") {
  const TinyProblem problem = tiny_problem(37);
  const std::vector<double> grid = {0.05, 0.8};  // increasing on purpose
  const auto path = fit_path(problem.sim.data, problem.start.theta0, grid, 5,
                             problem.options, &problem.start.latents);
  REQUIRE(path.size() == 2);
  CHECK(path[0].lambda == 0.05);
  CHECK(path[1].lambda == 0.8);
  CHECK(path[0].ok);
  CHECK(path[1].ok);
}

TEST_CASE("bic ties break toward the sparser model") {
  SelectionPath path(3);
  path[0].lambda = 1.0;
  path[0].ok = true;
  path[0].bic.bic = -100.0;
  path[1].lambda = 0.5;
  path[1].ok = true;
  path[1].bic.bic = -100.0;  // tie with entry 0
  path[2].lambda = 0.1;
  path[2].ok = true;
  path[2].bic.bic = -90.0;
  CHECK(pick_lambda(path) == 0);

  path[2].bic.bic = -120.0;
  CHECK(pick_lambda(path) == 2);

  path[0].ok = false;
  path[2].ok = false;
  CHECK(pick_lambda(path) == 1);
}

TEST_CASE("a grid of one huge lambda gives the empty support") {
  const TinyProblem problem = tiny_problem(41);
  const auto path =
      fit_path(problem.sim.data, problem.start.theta0, {50.0}, 3,
               problem.options, &problem.start.latents);
  REQUIRE(path[0].ok);
  CHECK(path[0].support.empty());
  CHECK(path[0].bic.active_count == 0);
  CHECK(path[0].bic.bic == -2.0 * path[0].bic.log_marginal);
}

TEST_CASE("null-beta designs select an empty support and still refit") {
  simulator::SimConfig config = simulator::study_config(43);
  config.n = 25;
  config.n_cov = 5;
  config.theta_true = simulator::study_theta(5);
  config.theta_true.beta.setZero();
  const auto sim = simulator::simulate(config);

  InitConfig init;
  RngStream rng(derive_seed(43, Stream::InitTheta));
  const auto start = make_start(sim.data, init, 80.0, 35.0, rng);

  PipelineOptions options;
  options.select.iterations = 400;
  options.select.schedule.warmup = 250;
  options.select.beta_freeze_iters = 80;
  options.refit.iterations = 400;
  options.refit.schedule.warmup = 250;
  options.mc_samples = 150;

  const auto result = select_and_refit(sim.data, start.theta0, {2.0, 0.9},
                                       11, options, &start.latents);
  CHECK(result.support.empty());
  CHECK(result.empty_support);
  CHECK(result.theta_refit.beta.cwiseAbs().maxCoeff() == 0.0);
  CHECK(result.theta_refit.mu(1) > 0.0);
}

TEST_CASE("study aggregation is order-independent and self-consistent") {
  const Theta truth = simulator::study_theta(3);
  std::vector<RunRecord> runs(4);
  RngStream rng(8);
  for (int r = 0; r < 4; ++r) {
    runs[r].run = r + 1;
    runs[r].seed = 100 + r;
    runs[r].ok = true;
    runs[r].estimate = truth;
    runs[r].estimate.alpha = 11.11 + rng.normal(0.0, 1.0);
    runs[r].estimate.mu(1) = 90.0 + rng.normal(0.0, 0.5);
    runs[r].estimate.beta = truth.beta + Eigen::VectorXd::Constant(3, 0.1 * r);
    runs[r].beta_lasso = 0.5 * runs[r].estimate.beta;
    runs[r].support = {0, 2};
  }
  runs[3].ok = false;
  runs[3].error = "synthetic failure";

  const StudyReport report = aggregate_study(truth, runs);
  CHECK(report.failed_runs == 1);

  // Self-consistency: the relative RMSE is recomputable from the runs.
  const auto& alpha_row = report.params[0];
  double sq = 0.0, mean = 0.0;
  for (int r = 0; r < 3; ++r) {
    sq += (runs[r].estimate.alpha - 11.11) * (runs[r].estimate.alpha - 11.11);
    mean += runs[r].estimate.alpha;
  }
  CHECK(alpha_row.name == "alpha");
  CHECK(alpha_row.mean_estimate == doctest::Approx(mean / 3).epsilon(1e-15));
  CHECK(alpha_row.rel_rmse ==
        doctest::Approx(std::sqrt(sq / 3) / 11.11).epsilon(1e-15));
  CHECK(report.beta_selection_freq(0) == 1.0);
  CHECK(report.beta_selection_freq(1) == 0.0);

  // Shuffling the run order leaves every aggregate unchanged.
  auto shuffled = runs;
  std::reverse(shuffled.begin(), shuffled.end());
  const StudyReport flipped = aggregate_study(truth, shuffled);
  for (std::size_t row = 0; row < report.params.size(); ++row) {
    CHECK(report.params[row].mean_estimate ==
          flipped.params[row].mean_estimate);
    CHECK(report.params[row].rel_rmse == flipped.params[row].rel_rmse);
  }
  CHECK((report.beta_mean_refit - flipped.beta_mean_refit)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("single-replicate study reports the run itself") {
  StudyConfig config;
  config.sim = simulator::study_config(0);
  config.sim.n = 14;
  config.sim.n_cov = 2;
  config.sim.theta_true = simulator::study_theta(2);
  config.pipeline.select.iterations = 250;
  config.pipeline.select.schedule.warmup = 150;
  config.pipeline.select.beta_freeze_iters = 50;
  config.pipeline.refit.iterations = 250;
  config.pipeline.refit.schedule.warmup = 150;
  config.pipeline.mc_samples = 100;
  config.grid_size = 3;
  config.grid_ratio = 5.0;

  const StudyReport report = replicate_study(config, 1, 99);
  REQUIRE(report.runs.size() == 1);
  REQUIRE(report.runs[0].ok);
  const RunRecord& run = report.runs[0];
  for (const auto& row : report.params) {
    if (row.name == "mu_2") {
      CHECK(row.mean_estimate == run.estimate.mu(1));
      CHECK(row.rel_rmse ==
            doctest::Approx(std::abs(run.estimate.mu(1) - 90.0) / 90.0)
                .epsilon(1e-15));
    }
  }
  // Replays are byte-identical.
  const StudyReport again = replicate_study(config, 1, 99);
  CHECK(again.runs[0].estimate.mu(1) == run.estimate.mu(1));
  CHECK(again.runs[0].lambda_m == run.lambda_m);
}
