#pragma once

#include <cstddef>
#include <functional>

namespace opcagent {

// Worker count from OPCAGENT_THREADS, else the hardware concurrency.
unsigned thread_count();

// Runs fn(i) for i in [0, n) over contiguous chunks. Each index must write
// only its own output slot; results are then independent of scheduling.
// The first exception thrown by a worker is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace opcagent
