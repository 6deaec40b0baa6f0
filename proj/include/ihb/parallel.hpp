#pragma once

#include <cstddef>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ihb {

// Execution mode for the batch kernels. Every parallel kernel has a serial
// twin reached with Exec::Serial; tests compare the two and the bench tool
// times them against each other.
enum class Exec { Serial, Parallel };

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <typename Fn>
void par_for(size_t n, Exec mode, Fn&& fn) {
  if (mode == Exec::Parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
      fn(static_cast<size_t>(i));
    }
    return;
#endif
  }
  for (size_t i = 0; i < n; ++i) fn(i);
}

}  // namespace ihb
