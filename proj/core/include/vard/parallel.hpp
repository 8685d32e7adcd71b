#pragma once

#include <cstddef>
#include <functional>

namespace vard {

/// Worker count: VARD_THREADS if set to a positive integer, else hardware concurrency.
unsigned thread_count();

/// Runs fn(i) for i in [0, count) on up to thread_count() threads. The first
/// exception thrown by any task is rethrown after all workers have joined.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace vard
