#pragma once

#include <cstddef>
#include <functional>

namespace iqlearn {

// Process-wide worker cap. 0 means use hardware concurrency. The CLI sets
// this from --threads / IQLEARN_THREADS.
void set_max_threads(unsigned n);
unsigned max_threads();

// Runs fn(i) for i in [0, n). Work items must write to disjoint slots:
// results are then independent of the thread count. Exceptions thrown by
// workers are captured and the first one is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace iqlearn
