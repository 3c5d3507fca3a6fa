#pragma once

#include <cstddef>
#include <functional>

namespace powerprior {

// Upper bound on worker threads used by the library. 0 means hardware concurrency.
void set_max_threads(unsigned n);
unsigned max_threads();

// Runs body(i) for i in [0, n). Results must be written by index so that
// output does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace powerprior
