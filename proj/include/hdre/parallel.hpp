#pragma once

#include <cstdint>
#include <functional>

namespace hdre::util {

/// Number of worker threads: hardware concurrency capped by the
/// HDRE_THREADS environment variable (minimum 1).
int worker_count();

/// Runs fn(begin, end) over a static partition of [0, n).
///
/// Each index is processed by exactly one worker in ascending order within
/// its range, so results never depend on the number of threads.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

} // namespace hdre::util
