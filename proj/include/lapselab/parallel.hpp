#pragma once

#include <cstddef>
#include <functional>

namespace lapselab {

/// Worker cap: LAPSELAB_THREADS if set and positive, else hardware concurrency.
std::size_t thread_count();

/// Runs fn(i) for i in [0, n). Each index is processed exactly once; callers
/// write results into pre-sized slots so output order never depends on
/// scheduling. Nested calls from inside a worker run sequentially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t max_threads = 0);

}  // namespace lapselab
