#pragma once

#include <cstddef>
#include <vector>

namespace metaimpact::parallel {

// Number of OpenMP workers used by the parallel kernels. 0 restores the
// runtime default. Results never depend on this value.
void set_workers(int n);
int workers();

// Block size for order-fixed reductions: partial results are formed per
// block of this many items and then combined in block order, so the
// floating-point summation order is independent of the worker count.
inline constexpr std::size_t kReduceBlock = 2048;

inline std::size_t block_count(std::size_t n) { return (n + kReduceBlock - 1) / kReduceBlock; }

// Deterministic parallel reduction over [0, n). `fold(acc, i)` accumulates
// item i into a block-local copy of `init`; `merge(total, part)` combines
// blocks sequentially in ascending block order.
template <typename Acc, typename Fold, typename Merge>
Acc blocked_reduce(std::size_t n, const Acc& init, Fold fold, Merge merge) {
  const std::size_t blocks = block_count(n);
  std::vector<Acc> parts(blocks, init);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t end = (b + 1) * kReduceBlock < n ? (b + 1) * kReduceBlock : n;
    for (std::size_t i = b * kReduceBlock; i < end; ++i) fold(parts[b], i);
  }
  Acc total = init;
  for (const Acc& part : parts) merge(total, part);
  return total;
}

}  // namespace metaimpact::parallel
