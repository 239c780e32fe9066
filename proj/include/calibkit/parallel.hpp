#pragma once

#include <cstddef>
#include <functional>

namespace calibkit {

/// Worker count: CALIBKIT_THREADS if set and positive, else hardware
/// concurrency (0 or unset means auto).
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Each index is processed exactly once; results
/// must be written to per-index slots so the outcome is independent of the
/// thread count. The exception from the lowest failing index is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace calibkit
