// Data-parallel loop over individuals.
//
// Kernels write per-individual results into preassigned slots and reduce in
// index order afterwards, so the outcome is identical for any thread count.

#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace coxmix {

template <class Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t i = 0; i < n; ++i) {
    fn(i);
  }
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace coxmix
