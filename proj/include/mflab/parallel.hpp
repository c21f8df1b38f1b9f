#pragma once

#include <cstddef>
#include <functional>

namespace mflab {

/// Worker count: hardware concurrency capped by MFLAB_THREADS when set.
int worker_count();

/// Run f(i) for i in [0, n) on up to worker_count() threads. Results must be
/// written to per-index slots; the first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace mflab
