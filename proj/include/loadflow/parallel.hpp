// Minimal thread-pool-free parallel loop.
#pragma once

#include <cstdint>
#include <functional>

namespace loadflow {

// Number of workers used when a caller passes workers <= 0.
int default_worker_count();

// Runs fn(i) for i in [0, n).  Iteration order is unspecified, so fn must be
// safe to call concurrently; correctness must not depend on the worker count.
// workers <= 0 means "use default_worker_count()"; workers == 1 runs inline.
// The first exception thrown by any fn is rethrown on the calling thread
// after all workers have stopped.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn,
                  int workers = 0);

}  // namespace loadflow
