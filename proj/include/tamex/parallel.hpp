#pragma once

#include <cstdint>
#include <functional>

namespace tamex {

// Worker count used by sample loops. 0 restores the hardware default.
void set_max_threads(int n);
int max_threads();

// Runs fn(begin, end) over a static partition of [0, n). Each index must
// write only its own output slot; reductions happen after, in index order,
// which is what makes results independent of the worker count. Worker
// exceptions are rethrown on the calling thread.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace tamex
