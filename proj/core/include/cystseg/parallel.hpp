#pragma once

#include <cstddef>
#include <functional>

namespace cystseg {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work items are claimed
/// dynamically; callers must write results into slot i so the outcome does not
/// depend on scheduling. The first exception thrown by any item is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace cystseg
