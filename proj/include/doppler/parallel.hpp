#pragma once

#include <cstddef>
#include <functional>

namespace doppler {

/// Worker count from the DOPPLER_THREADS environment variable (default 1).
std::size_t thread_count();

/// Runs body(i) for i in [0, n) on up to `threads` workers with static
/// contiguous chunks. If any call throws, the exception from the smallest
/// failing index is rethrown after all workers have joined.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace doppler
