#pragma once

#include <cstddef>
#include <functional>

namespace fbsde {

/// Paths are processed in blocks of this many rows. The block layout never
/// depends on the worker count, so block-ordered reductions are reproducible.
inline constexpr std::size_t kPathBlock = 4096;

/// Cap on path-parallel workers (process wide). 0 means hardware concurrency.
void set_max_workers(unsigned workers);
unsigned max_workers();

/// Calls fn(block_index, begin, end) for every block of [0, n). Blocks are
/// distributed over at most max_workers() threads; fn must only write to
/// block-disjoint outputs. The first exception thrown by any block is
/// rethrown after all workers finish.
void for_each_block(std::size_t n,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

inline std::size_t block_count(std::size_t n) { return (n + kPathBlock - 1) / kPathBlock; }

}  // namespace fbsde
