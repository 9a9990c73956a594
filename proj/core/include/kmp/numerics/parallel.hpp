#pragma once

#include <cstddef>
#include <functional>

namespace kmp {

// Worker count from KMP_THREADS (default: hardware concurrency, at least 1).
std::size_t max_threads();

// Runs fn(i) for i in [0, n) over up to max_threads() threads in contiguous
// blocks. Each index is handled exactly once, so callers writing to disjoint
// slots get results independent of the thread count. Nested calls run
// serially on the calling thread. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace kmp
