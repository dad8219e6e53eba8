#pragma once

#include <cstddef>
#include <functional>

namespace certdw {

/// Worker count from CERTDW_THREADS, falling back to hardware concurrency.
std::size_t default_worker_count();

/// Runs body(i) for i in [0, n) on up to `workers` threads. Each index runs
/// exactly once; callers write results into pre-sized slots so the outcome
/// does not depend on scheduling. The first exception thrown by any body is
/// rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body);

}  // namespace certdw
