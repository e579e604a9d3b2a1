#pragma once

#include <cstddef>
#include <functional>

namespace canopy::threads {

/// Worker count used by parallel stages: the programmatic override if set,
/// else the CANOPY_THREADS environment variable, else hardware concurrency.
std::size_t worker_count();

/// Overrides the worker count for this process (0 clears the override).
void set_worker_count(std::size_t n);

/// Runs fn(i) for i in [0, n) on up to worker_count() threads with static
/// block partitioning. Results must not depend on execution order; every
/// call site reduces by index, so any schedule yields identical output.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace canopy::threads
