#pragma once

#include <cstddef>
#include <functional>

namespace betarobust {

/// Thread count from BETAROBUST_THREADS when set, else hardware concurrency.
unsigned default_thread_count();

/// Runs body(0..count-1) on up to `threads` workers. Indices are claimed
/// dynamically; results must be written to per-index slots. The first
/// exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace betarobust
