#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace sspn {

// Worker count: SSPN_THREADS if set (>= 1), else hardware concurrency.
std::size_t thread_count();

// Runs fn(i) for i in [0, count). Calls made from inside a parallel region run
// inline, so nesting never oversubscribes. Work distribution never affects
// results: callers write into per-index slots and reduce afterwards.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

// Pairwise tree reduction in a fixed shape that depends only on parts.size().
// Used for per-block accumulators so sums do not depend on the thread count.
template <typename T, typename Combine>
T pairwise_reduce(std::vector<T> parts, Combine combine) {
  if (parts.empty()) return T{};
  while (parts.size() > 1) {
    std::vector<T> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2) {
      combine(parts[i], parts[i + 1]);
      next.push_back(std::move(parts[i]));
    }
    if (parts.size() % 2 == 1) next.push_back(std::move(parts.back()));
    parts = std::move(next);
  }
  return std::move(parts.front());
}

// Fixed row-block size used by all batched sweeps.
inline constexpr std::size_t kBlockRows = 128;

inline std::size_t block_count(std::size_t rows) { return (rows + kBlockRows - 1) / kBlockRows; }

}  // namespace sspn
