#pragma once

#include <cstdlib>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace eprlab {

/// Multi-MB temporaries stay on the heap instead of fresh mmap regions.
/// Call once at process start; no-op off glibc.
inline void tune_allocator() {
#if defined(__GLIBC__)
  constexpr int kThreshold = 256 << 20;
  mallopt(M_MMAP_THRESHOLD, kThreshold);
  mallopt(M_TRIM_THRESHOLD, kThreshold);
#endif
}

}  // namespace eprlab
