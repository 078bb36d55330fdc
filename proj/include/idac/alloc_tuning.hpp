#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace idac {

/// Keeps glibc from returning the tape's large temporaries to the OS after
/// every update (mmap/munmap churn otherwise costs about a third of the
/// runtime). Call once at the top of main(); a no-op elsewhere.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
  mallopt(M_TOP_PAD, 64 * 1024 * 1024);
#endif
}

}  // namespace idac
