#pragma once

#include <cstddef>
#include <functional>

namespace tinyssd {

/// Caps the number of worker threads used by kernels. 0 means hardware concurrency.
void set_max_threads(int threads);
int max_threads();

/// Reads TINYSSD_THREADS from the environment and applies it. Unset or invalid leaves auto.
void configure_threads_from_env();

/// Calls body(i) for i in [0, count). Iterations must be independent.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace tinyssd
