#pragma once

#include <functional>

namespace edpt {

// Runs fn(i) for i in [begin, end) on up to `workers` threads. Work is
// assigned by index, so any result keyed by i is identical for every worker
// count; reductions over shared floating-point state should instead write
// per-index slots and be folded serially by the caller.
void parallel_for(long begin, long end, int workers,
                  const std::function<void(long)>& fn);

// Number of hardware threads (at least 1).
int hardware_workers();

}  // namespace edpt
