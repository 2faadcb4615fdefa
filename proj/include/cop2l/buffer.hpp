#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "cop2l/data.hpp"
#include "cop2l/rng.hpp"

namespace cop2l {

// Uniform size-`count` subset via a Fisher-Yates prefix, re-sorted to
// ascending (task_id, global_index). Asking for the whole pool or more
// returns it unchanged and consumes no randomness, which keeps the stream
// aligned across runs whose pools differ only in degenerate calls.
inline std::vector<WeightedExample> sample_without_replacement(
    std::vector<WeightedExample> pool, std::uint64_t count, SeededStream& rng) {
  if (count >= pool.size()) return pool;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j =
        i + static_cast<std::size_t>(rng.uniform_below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(count));
  std::sort(pool.begin(), pool.end(), example_id_less);
  return pool;
}

}  // namespace cop2l
