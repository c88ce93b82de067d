#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "lacl/numcore/error.hpp"
#include "lacl/numcore/tensor.hpp"

namespace lacl {

inline constexpr double kNormEpsilon = 1e-12;

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("shape-mismatch", "dot of unequal lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// Column means of a token-major [len x D] matrix.
inline std::vector<double> mean_pool(const Tensor& tokens) {
  if (tokens.rank() != 2 || tokens.rows() == 0) throw Error("empty-sequence");
  const std::size_t len = tokens.rows();
  const std::size_t width = tokens.cols();
  std::vector<double> out(width, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    auto r = tokens.row(t);
    for (std::size_t d = 0; d < width; ++d) out[d] += r[d];
  }
  for (double& v : out) v /= static_cast<double>(len);
  return out;
}

inline std::vector<double> l2_normalize(std::span<const double> v) {
  const double n = l2_norm(v);
  if (!(n > kNormEpsilon)) throw Error("degenerate-vector", "norm below 1e-12");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

// Clamped into [-1, 1] so rounding never leaks outside the range.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (!(na > kNormEpsilon) || !(nb > kNormEpsilon)) throw Error("degenerate-vector");
  const double c = dot(a, b) / (na * nb);
  return std::fmax(-1.0, std::fmin(1.0, c));
}

}  // namespace lacl
