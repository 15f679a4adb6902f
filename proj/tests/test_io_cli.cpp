#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coxmix/io.hpp"
#include "coxmix/simulator.hpp"

using namespace coxmix;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("coxmix_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string cli_binary() {
  const char* bin = std::getenv("COXMIX_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "COXMIX_BIN must point at the CLI binary");
  return bin;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string command =
      cli_binary() + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("dataset bundles round-trip losslessly") {
  simulator::SimConfig config = simulator::study_config(3);
  config.n = 9;
  config.n_obs = 4;
  config.n_cov = 3;
  config.theta_true = simulator::study_theta(3);
  const auto sim = simulator::simulate(config);

  const fs::path dir = temp_dir("bundle");
  io::write_dataset_bundle(dir, config, sim);
  CHECK(fs::exists(dir / "longitudinal.csv"));
  CHECK(fs::exists(dir / "survival.csv"));
  CHECK(fs::exists(dir / "covariates.csv"));
  CHECK(fs::exists(dir / "meta.json"));

  const Dataset back = io::read_dataset_bundle(dir);
  CHECK((back.y - sim.data.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.survival - sim.data.survival).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.covariates - sim.data.covariates).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.obs_times - sim.data.obs_times).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("seventeen significant digits survive the text round trip") {
  for (double v : {1.0 / 3.0, 2.5e-3, 90.0, 1e-300, -0.123456789012345678}) {
    CHECK(std::stod(io::format_double(v)) == v);
  }
}

TEST_CASE("cli simulate writes a reproducible bundle") {
  const fs::path out1 = temp_dir("sim_a");
  const fs::path out2 = temp_dir("sim_b");
  const fs::path log = temp_dir("sim_logs") / "log.txt";

  CHECK(run_cli("simulate --seed 7 -N 10 -J 5 -p 3 --out " + out1.string(),
                log) == 0);
  CHECK(fs::exists(out1 / "longitudinal.csv"));
  CHECK(fs::exists(out1 / "resolved_config.json"));

  CHECK(run_cli("simulate --seed 7 -N 10 -J 5 -p 3 --out " + out2.string(),
                log) == 0);
  CHECK(slurp(out1 / "longitudinal.csv") == slurp(out2 / "longitudinal.csv"));
  CHECK(slurp(out1 / "survival.csv") == slurp(out2 / "survival.csv"));
  CHECK(slurp(out1 / "covariates.csv") == slurp(out2 / "covariates.csv"));
}

TEST_CASE("cli simulate rejects invalid configuration with exit code 2") {
  const fs::path out = temp_dir("sim_bad");
  const fs::path log = out / "log.txt";
  CHECK(run_cli("simulate --seed 1 -J 0 --out " + out.string(), log) == 2);
  const std::string message = slurp(log);
  CHECK(message.find("J") != std::string::npos);
}

TEST_CASE("cli fit writes an estimate and a trace with one row per step") {
  const fs::path data = temp_dir("fit_data");
  const fs::path out = temp_dir("fit_out");
  const fs::path log = out / "log.txt";
  fs::create_directories(out);
  REQUIRE(run_cli("simulate --seed 5 -N 12 -J 6 -p 3 --out " + data.string(),
                  log) == 0);

  CHECK(run_cli("fit --data " + data.string() +
                    " --lambda 0.3 --iterations 80 --warmup 50 --seed 9 "
                    "--out " + out.string(),
                log) == 0);
  CHECK(fs::exists(out / "estimate.csv"));
  const std::string trace = slurp(out / "trace.csv");
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 81);  // header + K

  // Refit mode with an explicit support.
  CHECK(run_cli("fit --data " + data.string() +
                    " --support 1,2 --lambda 0 --iterations 60 --warmup 40 "
                    "--seed 9 --out " + out.string(),
                log) == 0);
  const std::string estimate = slurp(out / "estimate.csv");
  CHECK(estimate.find("beta_3,0\n") != std::string::npos);
}

TEST_CASE("cli fit requires an existing dataset directory") {
  const fs::path out = temp_dir("fit_missing");
  const fs::path log = out / "log.txt";
  CHECK(run_cli("fit --data /nonexistent/bundle --out " + out.string(),
                log) == 2);
}

TEST_CASE("cli select writes the path and echoes the chosen lambda") {
  const fs::path data = temp_dir("sel_data");
  const fs::path out = temp_dir("sel_out");
  const fs::path log = out / "log.txt";
  fs::create_directories(out);
  REQUIRE(run_cli("simulate --seed 6 -N 12 -J 6 -p 2 --out " + data.string(),
                  log) == 0);

  std::ofstream cfg(out / "cfg.json");
  cfg << R"({"fit": {"iterations": 120, "warmup": 80, "beta_freeze_iters": 20},
             "refit": {"iterations": 120, "warmup": 80},
             "select": {"mc_samples": 60}})";
  cfg.close();

  CHECK(run_cli("select --data " + data.string() + " --grid 0.8,0.2 --seed 4 "
                    "--config " + (out / "cfg.json").string() + " --out " +
                    out.string(),
                log) == 0);
  CHECK(fs::exists(out / "path.csv"));
  CHECK(fs::exists(out / "estimate.csv"));
  CHECK(fs::exists(out / "refit_trace.csv"));
  const std::string path = slurp(out / "path.csv");
  CHECK(std::count(path.begin(), path.end(), '\n') == 3);  // header + 2 rows
  CHECK(slurp(log).find("selected lambda") != std::string::npos);
}

TEST_CASE("cli replicate writes the study report set") {
  const fs::path out = temp_dir("rep_out");
  const fs::path log = out / "log.txt";
  fs::create_directories(out);

  std::ofstream cfg(out / "cfg.json");
  cfg << R"({"sim": {"n": 10, "n_obs": 5, "n_cov": 2},
             "fit": {"iterations": 100, "warmup": 60, "beta_freeze_iters": 20},
             "refit": {"iterations": 100, "warmup": 60},
             "select": {"grid_size": 2, "mc_samples": 50}})";
  cfg.close();

  CHECK(run_cli("replicate --runs 1 --seed 3 --config " +
                    (out / "cfg.json").string() + " --out " + out.string(),
                log) == 0);
  CHECK(fs::exists(out / "beta_report.csv"));
  CHECK(fs::exists(out / "runs.csv"));
  CHECK(fs::exists(out / "summary.txt"));

  const std::string report = slurp(out / "report.csv");
  CHECK(std::count(report.begin(), report.end(), '\n') == 8);  // header + 7
  for (const char* name : {"alpha", "gamma_sq_1", "gamma_sq_2", "mu_1",
                           "mu_2", "mu_3", "sigma_sq"}) {
    CHECK(report.find(name) != std::string::npos);
  }
}
