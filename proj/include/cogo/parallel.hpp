#pragma once

#include <cstddef>
#include <functional>

namespace cogo {

/// Worker count used when callers pass 0: COGO_THREADS if set, otherwise
/// the hardware concurrency.
std::size_t default_threads();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must not
/// share mutable state. The first exception thrown by any item is rethrown
/// after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t threads = 0);

/// Keeps large temporaries on the reusable heap instead of fresh mappings,
/// which the autodiff tape otherwise pays for in page faults on every pass.
void tune_allocator();

}  // namespace cogo
