#pragma once

#include <cstddef>
#include <functional>

namespace turl {

/// Worker count: TURL_THREADS when set and positive, else the hardware count.
std::size_t thread_count();

/// Runs fn(i) for i in [0, n) across up to thread_count() workers. Each index
/// runs exactly once; the first exception thrown is rethrown after joining.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace turl
