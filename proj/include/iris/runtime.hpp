#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace iris {

/// Keeps freed matrix buffers in the heap instead of returning them to the
/// kernel; training allocates and frees the same sizes every step.
inline void configure_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace iris
