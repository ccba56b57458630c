#pragma once

#include <functional>

namespace scaffold {

/// Worker count: SCAFFOLD_OPT_THREADS if set and positive, else all cores.
int worker_count();

/// Runs fn(0..n-1) on up to `threads` workers (0 = worker_count()). Results
/// must be written to per-index slots; the first exception is rethrown.
void parallel_for(int n, const std::function<void(int)>& fn, int threads = 0);

}  // namespace scaffold
