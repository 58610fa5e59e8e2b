#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace etruck {

/// Runs fn(i) for i in [begin, end) on up to `workers` threads, in contiguous
/// chunks of at least `grain` indices. Each index is handled exactly once, so
/// results do not depend on the worker count as long as fn(i) only writes
/// state owned by i. If several chunks throw, the exception of the lowest
/// chunk is rethrown after all threads have joined.
template <class Fn>
void parallel_for(std::size_t begin, std::size_t end, int workers, Fn&& fn, std::size_t grain = 2048) {
  grain = std::max<std::size_t>(grain, 1);
  const std::size_t n = end > begin ? end - begin : 0;
  if (workers <= 1 || n < 2 * grain) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  const std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(workers), n / grain);
  std::vector<std::exception_ptr> errors(chunks);
  {
    std::vector<std::jthread> pool;
    pool.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t lo = begin + n * c / chunks;
      const std::size_t hi = begin + n * (c + 1) / chunks;
      pool.emplace_back([lo, hi, c, &fn, &errors] {
        try {
          for (std::size_t i = lo; i < hi; ++i) fn(i);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace etruck
