#pragma once

#include <cstddef>
#include <functional>

namespace speedrs {

// Worker count: SPEEDRS_THREADS if set (>= 1), otherwise hardware concurrency.
std::size_t thread_count();

// Runs body(i) for i in [0, n). Each index is processed exactly once; callers
// write results into preallocated slots so output never depends on scheduling.
// Calls made from inside a body run serially on the calling worker.
// The first exception thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace speedrs
