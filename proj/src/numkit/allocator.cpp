#include "scapv/numkit/allocator.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace scapv::numkit {

void keep_large_buffers_on_heap() {
#if defined(__GLIBC__)
  constexpr int kOneGiB = 1 << 30;
  mallopt(M_MMAP_THRESHOLD, kOneGiB);
  mallopt(M_TRIM_THRESHOLD, kOneGiB);
#endif
}

}  // namespace scapv::numkit
