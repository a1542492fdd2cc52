#pragma once

#include <cstddef>
#include <functional>

namespace bilimit {

/// Worker count: hardware concurrency, capped by the BILIMIT_THREADS environment variable.
std::size_t thread_count();

/// Runs body(i) for i in [0, n) on up to thread_count() threads. Each index runs exactly once;
/// the exception thrown for the lowest failing index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace bilimit
