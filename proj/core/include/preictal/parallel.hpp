#pragma once

#include <cstddef>
#include <functional>

namespace preictal {

// Worker count for data-parallel loops: PREICTAL_THREADS env var if set,
// otherwise hardware concurrency. Always >= 1.
int thread_count();
void set_thread_count(int n);  // 0 restores the default

// Split [0, n) into contiguous chunks, one worker per chunk. Each index is
// processed by exactly one worker with a fixed inner order, so results are
// bit-identical for any worker count as long as workers write disjoint data.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace preictal
