#pragma once

#include <span>
#include <vector>

#include "lacl/numcore/error.hpp"
#include "lacl/numcore/kernels.hpp"
#include "lacl/numcore/tensor.hpp"

namespace lacl {

struct NearestNeighbor {
  double score = 0.0;  // cosine similarity to the nearest row
  int label = -1;
  std::size_t index = 0;
};

// Max cosine similarity of `query` against every row of `bank`. Ties keep the
// lowest row index.
inline NearestNeighbor cosine_nearest(std::span<const double> query, const Tensor& bank,
                                      std::span<const int> labels) {
  if (bank.empty() || bank.rows() == 0) throw Error("empty-bank");
  if (labels.size() != bank.rows()) throw Error("shape-mismatch", "bank labels vs rows");
  if (query.size() != bank.cols()) throw Error("shape-mismatch", "query width vs bank width");
  NearestNeighbor best{-2.0, -1, 0};
  for (std::size_t i = 0; i < bank.rows(); ++i) {
    const double s = cosine_similarity(query, bank.row(i));
    if (s > best.score) best = {s, labels[i], i};
  }
  return best;
}

// Columns [begin, begin + width) of every row.
inline Tensor slice_columns(const Tensor& x, std::size_t begin, std::size_t width) {
  if (begin + width > x.cols()) throw Error("index-out-of-range", "column slice");
  Tensor out({x.rows(), width});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < width; ++j) out(i, j) = x(i, begin + j);
  return out;
}

}  // namespace lacl
