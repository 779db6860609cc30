// SPDX-License-Identifier: Apache-2.0
// Thin OpenMP shims so the library also builds without -fopenmp.
#ifndef LINKDISTILL_PARALLEL_HPP_
#define LINKDISTILL_PARALLEL_HPP_

#ifdef _OPENMP
#include <omp.h>
#endif

namespace linkdistill::par {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline int thread_num() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

/// Applies to parallel regions started by the calling thread only.
inline void set_num_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n < 1 ? 1 : n);
#else
  (void)n;
#endif
}

}  // namespace linkdistill::par

#endif  // LINKDISTILL_PARALLEL_HPP_
