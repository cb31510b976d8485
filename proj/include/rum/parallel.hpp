#pragma once

#include <cstddef>
#include <functional>

namespace rum {

// Worker count: RUM_THREADS if set (clamped to [1, hardware]), else hardware.
int worker_count();

// Runs fn(i) for i in [0, count). Tasks must write to disjoint state; the
// output is deterministic regardless of the worker count. Exceptions from
// tasks are captured and the first one is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace rum
