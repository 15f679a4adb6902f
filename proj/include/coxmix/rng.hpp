// Seeded random streams for reproducible simulation and fitting.
//
// Every stochastic component draws from its own RngStream derived from the
// master seed and a (domain, index) pair, so per-individual work can run on
// any number of threads and still produce the same numbers. The generator is
// xoshiro256++ seeded through splitmix64; normals come from Box-Muller. No
// standard-library distributions are used, so sequences are identical across
// platforms and compilers.

#pragma once

#include <cstdint>
#include <cmath>

namespace coxmix {

// Stream domains. Each stochastic consumer owns one label so substreams
// never collide.
enum class Stream : std::uint64_t {
  SimLatent = 1,    // per-individual latent draws + longitudinal noise
  SimCovariate = 2, // per-individual covariate rows
  SimSurvival = 3,  // per-individual survival uniforms
  MhChain = 4,      // per-individual Metropolis-Hastings substreams
  MarginalMc = 5,   // per-individual Monte-Carlo marginal draws
  InitTheta = 6,    // theta0 draws (beta ~ U[-1,1], jitter)
  Replicate = 7,    // per-replicate master seeds
  Bic = 8,          // common random numbers for BIC evaluations
  Refit = 9,        // SG-FIM refit
  Custom = 100,
};

inline std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic substream key: seed x domain x index -> new seed.
inline std::uint64_t derive_seed(std::uint64_t seed, Stream domain,
                                 std::uint64_t index = 0) {
  std::uint64_t h = mix64(seed ^ (0xD1B54A32D192ED03ull *
                                  (static_cast<std::uint64_t>(domain) + 1)));
  return mix64(h ^ (0x9E3779B97F4A7C15ull * (index + 1)));
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) {
      sm = mix64(sm);
      word = sm;
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
    // xoshiro256++
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on the open interval (0, 1); never returns an endpoint.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace coxmix
