// Benchmark: parallel kernels against the serial reference implementation
// on a study-sized problem. Prints per-kernel timings, the speedup, and the
// largest deviation between the two implementations.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include "coxmix/marginal.hpp"
#include "coxmix/model.hpp"
#include "coxmix/parallel.hpp"
#include "coxmix/reference.hpp"
#include "coxmix/simulator.hpp"

using namespace coxmix;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < repeats; ++r) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() /
         repeats;
}

void report(const char* name, double serial_ms, double parallel_ms,
            double max_diff) {
  std::printf("%-22s %10.3f ms %10.3f ms %8.2fx %12.3e\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms, max_diff);
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 20;
  auto config = simulator::study_config(2024);
  const auto sim = simulator::simulate(config);
  const Theta theta = config.theta_true;
  const auto rule = hazard::QuadratureRule::gauss_legendre(64);
  const auto latents = sim.latents;

  std::printf("N=%d J=%d p=%d, threads=%d, %d repeats\n", config.n,
              config.n_obs, config.n_cov, max_threads(), repeats);
  std::printf("%-22s %13s %13s %9s %12s\n", "kernel", "reference", "parallel",
              "speedup", "max diff");

  {
    double value_par = 0.0, value_ref = 0.0;
    const double par_ms = time_ms(
        [&] { value_par = model::complete_loglik(theta, sim.data, latents, rule); },
        repeats);
    const double ref_ms = time_ms(
        [&] { value_ref = ref::complete_loglik(theta, sim.data, latents, rule); },
        repeats);
    report("complete_loglik", ref_ms, par_ms,
           std::abs(value_par - value_ref) / std::abs(value_ref));
  }
  {
    Eigen::MatrixXd g_par, g_ref;
    const double par_ms = time_ms(
        [&] { g_par = model::per_individual_grads(theta, sim.data, latents, rule); },
        repeats);
    const double ref_ms = time_ms(
        [&] { g_ref = ref::per_individual_grads(theta, sim.data, latents, rule); },
        repeats);
    report("per_individual_grads", ref_ms, par_ms,
           (g_par - g_ref).cwiseAbs().maxCoeff());
  }
  {
    const int S = 1000;
    double v_par = 0.0, v_ref = 0.0;
    const double par_ms = time_ms(
        [&] { v_par = marginal::log_marginal_mc(theta, sim.data, S, 7, rule).value; },
        std::max(1, repeats / 4));
    const double ref_ms = time_ms(
        [&] { v_ref = ref::log_marginal_mc(theta, sim.data, S, 7, rule); },
        std::max(1, repeats / 4));
    report("log_marginal_mc", ref_ms, par_ms,
           std::abs(v_par - v_ref) / std::abs(v_ref));
  }
  return 0;
}
