// Command-line front end: simulate | fit | select | replicate.
//
// Options resolve as defaults < --config file < flags, and every run writes
// a resolved_config.json echo so outputs are reproducible from artifacts
// alone. Exit codes: 0 success, 1 numeric failure, 2 configuration or I/O
// error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "coxmix/io.hpp"
#include "coxmix/parallel.hpp"
#include "coxmix/pipeline.hpp"
#include "coxmix/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace coxmix;

namespace {

struct CommonArgs {
  std::string config_file;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;
  bool timings = false;
};

json load_config(const std::string& file) {
  if (file.empty()) return json::object();
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("config file not found: " + file);
  json cfg;
  in >> cfg;
  return cfg;
}

// Fills `value` from cfg[key] unless the flag was given on the command line.
template <class T>
void resolve(const CLI::App* cmd, const std::string& flag, const json& cfg,
             const std::string& key, T& value) {
  const CLI::Option* opt = cmd->get_option_no_throw(flag);
  if (opt != nullptr && opt->count() > 0) return;
  if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

fs::path resolve_out(const std::string& out, const std::string& command) {
  if (!out.empty()) return out;
  const char* root = std::getenv("COXMIX_OUT_ROOT");
  return fs::path(root != nullptr ? root : "runs") / command;
}

Theta theta_from_json(const json& j, const Theta& base) {
  Theta theta = base;
  if (j.contains("baseline_a")) theta.baseline_a = j["baseline_a"];
  if (j.contains("baseline_b")) theta.baseline_b = j["baseline_b"];
  if (j.contains("alpha")) theta.alpha = j["alpha"];
  if (j.contains("mu")) {
    for (int k = 0; k < 3; ++k) theta.mu(k) = j["mu"].at(k);
  }
  if (j.contains("gamma_sq")) {
    for (int k = 0; k < 2; ++k) theta.gamma_sq(k) = j["gamma_sq"].at(k);
  }
  if (j.contains("sigma_sq")) theta.sigma_sq = j["sigma_sq"];
  if (j.contains("beta")) {
    const auto& b = j["beta"];
    theta.beta.resize(b.size());
    for (std::size_t k = 0; k < b.size(); ++k) theta.beta(k) = b.at(k);
  }
  return theta;
}

json theta_to_json(const Theta& theta) {
  json j;
  j["baseline_a"] = theta.baseline_a;
  j["baseline_b"] = theta.baseline_b;
  j["beta"] = std::vector<double>(theta.beta.begin(), theta.beta.end());
  j["alpha"] = theta.alpha;
  j["mu"] = {theta.mu(0), theta.mu(1), theta.mu(2)};
  j["gamma_sq"] = {theta.gamma_sq(0), theta.gamma_sq(1)};
  j["sigma_sq"] = theta.sigma_sq;
  return j;
}

void apply_optimizer_config(const json& cfg, optimizer::SpgOptions& opts) {
  if (cfg.contains("iterations")) opts.iterations = cfg["iterations"];
  if (cfg.contains("warmup")) opts.schedule.warmup = cfg["warmup"];
  if (cfg.contains("damping")) opts.damping = cfg["damping"];
  if (cfg.contains("identity_precond_iters")) {
    opts.identity_precond_iters = cfg["identity_precond_iters"];
  }
  if (cfg.contains("max_coord_step")) opts.max_coord_step = cfg["max_coord_step"];
  if (cfg.contains("max_step_norm")) opts.max_step_norm = cfg["max_step_norm"];
  if (cfg.contains("mh_target_rate")) opts.mh_target_rate = cfg["mh_target_rate"];
  if (cfg.contains("mh_steps_per_iter")) opts.mh_steps_per_iter = cfg["mh_steps_per_iter"];
  if (cfg.contains("delta_smoothing")) opts.delta_smoothing = cfg["delta_smoothing"];
  if (cfg.contains("beta_freeze_iters")) opts.beta_freeze_iters = cfg["beta_freeze_iters"];
  if (cfg.contains("mh_adapt_interval")) {
    opts.mh_adapt_interval = cfg["mh_adapt_interval"];
  }
  if (cfg.contains("quadrature_order")) {
    opts.quadrature_order = cfg["quadrature_order"];
  }
  if (cfg.contains("zero_tol")) opts.zero_tol = cfg["zero_tol"];
}

json optimizer_to_json(const optimizer::SpgOptions& opts) {
  json j;
  j["iterations"] = opts.iterations;
  j["warmup"] = opts.schedule.warmup;
  j["damping"] = opts.damping;
  j["identity_precond_iters"] = opts.identity_precond_iters;
  j["max_coord_step"] = opts.max_coord_step;
  j["max_step_norm"] = opts.max_step_norm;
  j["mh_target_rate"] = opts.mh_target_rate;
  j["mh_adapt_interval"] = opts.mh_adapt_interval;
  j["quadrature_order"] = opts.quadrature_order;
  j["zero_tol"] = opts.zero_tol;
  return j;
}

void apply_init_config(const json& cfg, pipeline::InitConfig& init) {
  if (cfg.contains("data_driven")) init.data_driven = cfg["data_driven"];
  if (cfg.contains("mu0")) {
    for (int k = 0; k < 3; ++k) init.mu0(k) = cfg["mu0"].at(k);
  }
  if (cfg.contains("gamma_sq0")) {
    for (int k = 0; k < 2; ++k) init.gamma_sq0(k) = cfg["gamma_sq0"].at(k);
  }
  if (cfg.contains("sigma_sq0")) init.sigma_sq0 = cfg["sigma_sq0"];
  if (cfg.contains("alpha0")) init.alpha0 = cfg["alpha0"];
  if (cfg.contains("jitter")) init.jitter = cfg["jitter"];
}

json init_to_json(const pipeline::InitConfig& init) {
  json j;
  j["data_driven"] = init.data_driven;
  j["mu0"] = {init.mu0(0), init.mu0(1), init.mu0(2)};
  j["gamma_sq0"] = {init.gamma_sq0(0), init.gamma_sq0(1)};
  j["sigma_sq0"] = init.sigma_sq0;
  j["alpha0"] = init.alpha0;
  j["jitter"] = init.jitter;
  return j;
}

void apply_sim_config(const json& cfg, simulator::SimConfig& sim) {
  if (cfg.contains("n")) sim.n = cfg["n"];
  if (cfg.contains("n_obs")) sim.n_obs = cfg["n_obs"];
  if (cfg.contains("n_cov")) {
    sim.n_cov = cfg["n_cov"];
    if (sim.theta_true.n_cov() != sim.n_cov) {
      Eigen::VectorXd beta = Eigen::VectorXd::Zero(sim.n_cov);
      const int keep = std::min<int>(sim.n_cov, sim.theta_true.n_cov());
      beta.head(keep) = sim.theta_true.beta.head(keep);
      sim.theta_true.beta = beta;
    }
  }
  if (cfg.contains("t_start")) sim.t_start = cfg["t_start"];
  if (cfg.contains("t_end")) sim.t_end = cfg["t_end"];
  if (cfg.contains("cov_low")) sim.cov_low = cfg["cov_low"];
  if (cfg.contains("cov_high")) sim.cov_high = cfg["cov_high"];
  if (cfg.contains("quadrature_order")) {
    sim.quadrature_order = cfg["quadrature_order"];
  }
  if (cfg.contains("theta_true")) {
    sim.theta_true = theta_from_json(cfg["theta_true"], sim.theta_true);
    sim.n_cov = sim.theta_true.n_cov();
  }
}

json sim_to_json(const simulator::SimConfig& sim) {
  json j;
  j["n"] = sim.n;
  j["n_obs"] = sim.n_obs;
  j["n_cov"] = sim.n_cov;
  j["t_start"] = sim.t_start;
  j["t_end"] = sim.t_end;
  j["cov_low"] = sim.cov_low;
  j["cov_high"] = sim.cov_high;
  j["quadrature_order"] = sim.quadrature_order;
  j["theta_true"] = theta_to_json(sim.theta_true);
  return j;
}

void write_resolved_config(const fs::path& dir, const json& resolved) {
  fs::create_directories(dir);
  std::ofstream out(dir / "resolved_config.json");
  out << resolved.dump(2) << '\n';
}

std::vector<int> parse_support(const std::string& spec) {
  std::vector<int> support;
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    const int idx = std::stoi(token);
    if (idx < 1) throw std::invalid_argument("support indices are 1-based");
    support.push_back(idx - 1);
  }
  return support;
}

void write_timings(const fs::path& dir, const pipeline::StudyReport& report) {
  std::ofstream out(dir / "timings.csv");
  out << "run,elapsed_sec\n";
  for (const auto& run : report.runs) {
    out << run.run << ',' << io::format_double(run.elapsed_sec) << '\n';
  }
}

int run_simulate(const CLI::App* cmd, const CommonArgs& common,
                 const std::string& preset, int n, int n_obs, int n_cov) {
  const json cfg = load_config(common.config_file);
  simulator::SimConfig sim;
  if (preset == "table1") {
    sim = simulator::study_config(common.seed);
  } else if (!preset.empty()) {
    throw std::invalid_argument("unknown preset: " + preset);
  }
  if (cfg.contains("sim")) apply_sim_config(cfg["sim"], sim);
  if (cmd->get_option("-N")->count() > 0) sim.n = n;
  if (cmd->get_option("-J")->count() > 0) sim.n_obs = n_obs;
  if (cmd->get_option("-p")->count() > 0) {
    json override_cov;
    override_cov["n_cov"] = n_cov;
    apply_sim_config(override_cov, sim);
  }
  sim.seed = common.seed;
  sim.validate();

  const fs::path out_dir = resolve_out(common.out, "simulate");
  const auto result = simulator::simulate(sim);
  io::write_dataset_bundle(out_dir, sim, result);

  json resolved;
  resolved["command"] = "simulate";
  resolved["seed"] = common.seed;
  resolved["threads"] = common.threads;
  resolved["out"] = out_dir.string();
  resolved["sim"] = sim_to_json(sim);
  write_resolved_config(out_dir, resolved);
  std::cout << "wrote dataset bundle to " << out_dir.string() << "\n";
  return 0;
}

int run_fit(const CLI::App* cmd, const CommonArgs& common,
            const std::string& data_dir, double lambda,
            const std::string& support_spec, optimizer::SpgOptions opts,
            pipeline::InitConfig init) {
  const json cfg = load_config(common.config_file);
  if (cfg.contains("fit")) apply_optimizer_config(cfg["fit"], opts);
  if (cfg.contains("init")) apply_init_config(cfg["init"], init);
  resolve(cmd, "--lambda", cfg, "lambda", lambda);
  resolve(cmd, "--iterations", cfg.contains("fit") ? cfg["fit"] : json{},
          "iterations", opts.iterations);
  resolve(cmd, "--warmup", cfg.contains("fit") ? cfg["fit"] : json{}, "warmup",
          opts.schedule.warmup);

  const Dataset data = io::read_dataset_bundle(data_dir);
  double baseline_a = cfg.value("baseline_a", 80.0);
  double baseline_b = cfg.value("baseline_b", 35.0);
  RngStream init_rng(derive_seed(common.seed, Stream::InitTheta));
  const pipeline::StartingPoint start =
      pipeline::make_start(data, init, baseline_a, baseline_b, init_rng);
  sampler::MhState mh_start =
      sampler::MhState::init(start.theta0, start.latents, common.seed);

  optimizer::FitResult fit_result =
      support_spec.empty()
          ? optimizer::spg_fim(data, start.theta0, lambda, common.seed, opts,
                               &mh_start)
          : optimizer::sg_fim(data, start.theta0, parse_support(support_spec),
                              common.seed, opts, &mh_start);

  const fs::path out_dir = resolve_out(common.out, "fit");
  fs::create_directories(out_dir);
  io::write_estimate_csv(out_dir / "estimate.csv", fit_result.theta);
  io::write_trace_csv(out_dir / "trace.csv", fit_result.trace, data.n_cov());

  json resolved;
  resolved["command"] = "fit";
  resolved["seed"] = common.seed;
  resolved["threads"] = common.threads;
  resolved["out"] = out_dir.string();
  resolved["data"] = data_dir;
  resolved["lambda"] = lambda;
  resolved["support"] = support_spec;
  resolved["fit"] = optimizer_to_json(opts);
  resolved["init"] = init_to_json(init);
  write_resolved_config(out_dir, resolved);
  std::cout << "wrote estimate and trace to " << out_dir.string() << "\n";
  return 0;
}

int run_select(const CLI::App* cmd, const CommonArgs& common,
               const std::string& data_dir, const std::string& grid_spec,
               pipeline::StudyConfig study) {
  const json cfg = load_config(common.config_file);
  if (cfg.contains("fit")) apply_optimizer_config(cfg["fit"], study.pipeline.select);
  if (cfg.contains("refit")) apply_optimizer_config(cfg["refit"], study.pipeline.refit);
  if (cfg.contains("init")) apply_init_config(cfg["init"], study.init);
  if (cfg.contains("select")) {
    const json& sel = cfg["select"];
    if (sel.contains("grid_size")) study.grid_size = sel["grid_size"];
    if (sel.contains("grid_ratio")) study.grid_ratio = sel["grid_ratio"];
    if (sel.contains("mc_samples")) study.pipeline.mc_samples = sel["mc_samples"];
    if (sel.contains("zero_tol")) study.pipeline.zero_tol = sel["zero_tol"];
  }
  resolve(cmd, "--grid-size", cfg.contains("select") ? cfg["select"] : json{},
          "grid_size", study.grid_size);
  resolve(cmd, "--mc-samples", cfg.contains("select") ? cfg["select"] : json{},
          "mc_samples", study.pipeline.mc_samples);

  const Dataset data = io::read_dataset_bundle(data_dir);
  double baseline_a = cfg.value("baseline_a", 80.0);
  double baseline_b = cfg.value("baseline_b", 35.0);
  RngStream init_rng(derive_seed(common.seed, Stream::InitTheta));
  const pipeline::StartingPoint start =
      pipeline::make_start(data, study.init, baseline_a, baseline_b, init_rng);

  std::vector<double> grid;
  if (grid_spec == "auto" || grid_spec.empty()) {
    grid = pipeline::auto_lambda_grid(data, start.theta0, study.grid_size,
                                      study.grid_ratio, study.pipeline.select,
                                      &start.latents);
  } else {
    std::stringstream ss(grid_spec);
    std::string token;
    while (std::getline(ss, token, ',')) {
      if (!token.empty()) grid.push_back(std::stod(token));
    }
    if (grid.empty()) throw std::invalid_argument("empty lambda grid");
  }

  const auto selected =
      pipeline::select_and_refit(data, start.theta0, grid, common.seed,
                                 study.pipeline, &start.latents);

  const fs::path out_dir = resolve_out(common.out, "select");
  fs::create_directories(out_dir);
  io::write_path_csv(out_dir / "path.csv", selected.path, data.n_cov());
  io::write_estimate_csv(out_dir / "estimate.csv", selected.theta_refit);
  io::write_trace_csv(out_dir / "refit_trace.csv", selected.refit_trace,
                      data.n_cov());

  json resolved;
  resolved["command"] = "select";
  resolved["seed"] = common.seed;
  resolved["threads"] = common.threads;
  resolved["out"] = out_dir.string();
  resolved["data"] = data_dir;
  resolved["grid"] = grid;
  resolved["chosen_lambda"] = selected.path[selected.chosen].lambda;
  resolved["fit"] = optimizer_to_json(study.pipeline.select);
  resolved["refit"] = optimizer_to_json(study.pipeline.refit);
  resolved["init"] = init_to_json(study.init);
  resolved["mc_samples"] = study.pipeline.mc_samples;
  write_resolved_config(out_dir, resolved);

  std::cout << "selected lambda " << selected.path[selected.chosen].lambda
            << " with support size " << selected.support.size() << "\n"
            << "wrote path and refit estimate to " << out_dir.string() << "\n";
  if (selected.empty_support) {
    std::cout << "warning: selected support is empty; refit keeps beta = 0\n";
  }
  return 0;
}

int run_replicate(const CLI::App* cmd, const CommonArgs& common, int runs,
                  const std::string& preset, pipeline::StudyConfig study) {
  const json cfg = load_config(common.config_file);
  if (preset == "table1" || preset.empty()) {
    study.sim = simulator::study_config(common.seed);
  } else {
    throw std::invalid_argument("unknown preset: " + preset);
  }
  if (cfg.contains("sim")) apply_sim_config(cfg["sim"], study.sim);
  if (cfg.contains("fit")) apply_optimizer_config(cfg["fit"], study.pipeline.select);
  if (cfg.contains("refit")) apply_optimizer_config(cfg["refit"], study.pipeline.refit);
  if (cfg.contains("init")) apply_init_config(cfg["init"], study.init);
  if (cfg.contains("select")) {
    const json& sel = cfg["select"];
    if (sel.contains("grid_size")) study.grid_size = sel["grid_size"];
    if (sel.contains("grid_ratio")) study.grid_ratio = sel["grid_ratio"];
    if (sel.contains("mc_samples")) study.pipeline.mc_samples = sel["mc_samples"];
    if (sel.contains("zero_tol")) study.pipeline.zero_tol = sel["zero_tol"];
  }
  resolve(cmd, "--runs", cfg, "runs", runs);

  const auto report = pipeline::replicate_study(study, runs, common.seed);

  const fs::path out_dir = resolve_out(common.out, "replicate");
  io::write_study_report(out_dir, report);
  io::write_text_summary(out_dir / "summary.txt", report);
  if (common.timings) write_timings(out_dir, report);

  json resolved;
  resolved["command"] = "replicate";
  resolved["seed"] = common.seed;
  resolved["threads"] = common.threads;
  resolved["out"] = out_dir.string();
  resolved["runs"] = runs;
  resolved["sim"] = sim_to_json(study.sim);
  resolved["fit"] = optimizer_to_json(study.pipeline.select);
  resolved["refit"] = optimizer_to_json(study.pipeline.refit);
  resolved["init"] = init_to_json(study.init);
  resolved["grid_size"] = study.grid_size;
  resolved["grid_ratio"] = study.grid_ratio;
  resolved["mc_samples"] = study.pipeline.mc_samples;
  write_resolved_config(out_dir, resolved);

  std::cout << "completed " << runs << " replicates (" << report.failed_runs
            << " failed); report in " << out_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint survival / nonlinear mixed-effects model fitting"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonArgs common;
  app.add_option("--config", common.config_file, "JSON configuration file");
  app.add_option("--seed", common.seed, "master seed");
  app.add_option("--out", common.out, "output directory");
  app.add_option("--threads", common.threads,
                 "worker cap (0 = library default); results do not depend "
                 "on it");
  app.add_flag("--timings", common.timings, "write per-run wall times");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "generate a dataset bundle");
  std::string preset = "table1";
  int n = 100, n_obs = 20, n_cov = 100;
  sim_cmd->add_option("--preset", preset, "named preset (table1)");
  sim_cmd->add_option("-N", n, "individuals");
  sim_cmd->add_option("-J", n_obs, "observations per individual");
  sim_cmd->add_option("-p", n_cov, "covariates");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "single penalized or refit run");
  std::string data_dir;
  double lambda = 0.0;
  std::string support_spec;
  optimizer::SpgOptions fit_opts;
  fit_cmd->add_option("--data", data_dir, "dataset bundle directory")
      ->required();
  fit_cmd->add_option("--lambda", lambda, "Lasso regularization parameter");
  fit_cmd->add_option("--support", support_spec,
                      "comma-separated 1-based support; switches to the "
                      "unpenalized SG-FIM refit");
  fit_cmd->add_option("--iterations", fit_opts.iterations, "iteration count");
  fit_cmd->add_option("--warmup", fit_opts.schedule.warmup,
                      "warm-up iterations with unit step");

  // select
  auto* select_cmd =
      app.add_subcommand("select", "lambda path, BIC choice, and refit");
  std::string select_data;
  std::string grid_spec = "auto";
  pipeline::StudyConfig select_study;
  select_cmd->add_option("--data", select_data, "dataset bundle directory")
      ->required();
  select_cmd->add_option("--grid", grid_spec,
                         "'auto' or comma-separated lambda values");
  select_cmd->add_option("--grid-size", select_study.grid_size,
                         "auto grid size");
  select_cmd->add_option("--mc-samples", select_study.pipeline.mc_samples,
                         "Monte-Carlo samples for the marginal likelihood");

  // replicate
  auto* rep_cmd =
      app.add_subcommand("replicate", "multi-replicate simulation study");
  int runs = 10;
  std::string rep_preset = "table1";
  pipeline::StudyConfig rep_study;
  rep_cmd->add_option("--runs", runs, "number of replicates");
  rep_cmd->add_option("--preset", rep_preset, "named preset (table1)");

  CLI11_PARSE(app, argc, argv);

  set_threads(common.threads);

  try {
    if (sim_cmd->parsed()) {
      return run_simulate(sim_cmd, common, preset, n, n_obs, n_cov);
    }
    if (fit_cmd->parsed()) {
      return run_fit(fit_cmd, common, data_dir, lambda, support_spec, fit_opts,
                     pipeline::InitConfig{});
    }
    if (select_cmd->parsed()) {
      return run_select(select_cmd, common, select_data, grid_spec,
                        select_study);
    }
    if (rep_cmd->parsed()) {
      return run_replicate(rep_cmd, common, runs, rep_preset, rep_study);
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
