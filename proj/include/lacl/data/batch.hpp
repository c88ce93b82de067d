#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "lacl/numcore/error.hpp"
#include "lacl/numcore/random.hpp"

namespace lacl {

// Example indices for one epoch, split into batches. The order is a seeded
// shuffle keyed on (seed, epoch); the final short batch is kept.
inline std::vector<std::vector<std::size_t>> batch_iter(std::size_t num_examples, std::size_t batch_size,
                                                        std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 2) throw Error("invalid-batch-size", "batch size must be at least 2");
  std::vector<std::size_t> order(num_examples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed({seed, epoch, 0x6261746368ULL}));
  rng.shuffle(order.begin(), order.end());
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < num_examples; i += batch_size) {
    const std::size_t end = std::min(num_examples, i + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace lacl
