#pragma once

namespace scapv::numkit {

// Every op allocates and frees its output buffer. With glibc's default
// thresholds buffers above a few MB come from fresh mappings and are
// page-faulted on each use; this keeps them on the reusable heap instead.
// No-op on other C libraries. Call once at program start.
void keep_large_buffers_on_heap();

}  // namespace scapv::numkit
