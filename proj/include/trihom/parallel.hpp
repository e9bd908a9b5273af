#pragma once

#include <cstddef>
#include <functional>

namespace trihom {

/// Worker cap: the THREADS environment variable if set, else the hardware
/// concurrency. Always at least 1.
int thread_limit();

/// Runs body(i) for i in [0, n); body(i) must write only its own output.
/// The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace trihom
