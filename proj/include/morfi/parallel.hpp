#pragma once

#include <functional>
#include <thread>

namespace morfi {

// Runs fn(block) for block = 0..n_blocks-1 on up to n_threads workers.
// Blocks are independent units whose boundaries never depend on the thread
// count, so callers that reduce per-block results in block order get
// bit-identical output for any n_threads.
void parallel_blocks(int n_blocks, int n_threads, const std::function<void(int)>& fn);

// Resolves a requested thread count: <=0 means "use the hardware".
int resolve_threads(int requested);

} // namespace morfi
