#pragma once

#include <cstddef>
#include <functional>

namespace helios {

/// Worker cap: HELIOS_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs body(begin, end) over [0, n) split into fixed chunks of `grain`
/// items. Chunk boundaries depend only on n and grain, never on the worker
/// count, so any per-item computation is identical however many threads run.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace helios
