#pragma once

#include <cstddef>
#include <functional>

namespace coge {

/// Calls fn(i) for every i in [0, count) on up to `workers` threads. Work is
/// handed out by an atomic counter; callers write results by index so the
/// outcome does not depend on scheduling. The first exception thrown by any
/// call is rethrown after all workers have joined.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace coge
