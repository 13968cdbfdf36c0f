#pragma once

#include <cstddef>
#include <functional>

namespace rgns {

// Process-wide worker count for parallel_for. Default 1.
void set_threads(int n);
int threads();

// Splits [0, n) into contiguous chunks, one per worker. Each index is
// processed by exactly one worker with identical per-index arithmetic, so
// results are bit-identical for any thread count as long as the body writes
// only to its own indices.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace rgns
