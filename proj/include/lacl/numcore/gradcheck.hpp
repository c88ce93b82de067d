#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "lacl/numcore/error.hpp"

namespace lacl {

using ScalarObjective = std::function<double(std::span<const double>)>;

// Central-difference gradient estimate (f(x + h e_i) - f(x - h e_i)) / 2h.
// `coords` restricts the estimate to a subset of coordinates; the remaining
// entries are left at zero.
inline std::vector<double> finite_diff_gradient(const ScalarObjective& f, std::vector<double> x,
                                                double h = 1e-5,
                                                std::span<const std::size_t> coords = {}) {
  if (!(h > 0.0)) throw Error("invalid-step", "finite difference step must be positive");
  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) all[i] = i;
    coords = all;
  }
  std::vector<double> grad(x.size(), 0.0);
  for (std::size_t i : coords) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error("non-finite-objective", "at coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// ||a - b|| / max(||a||, ||b||), or 0 when both are exactly zero.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom == 0.0 ? std::sqrt(diff) : std::sqrt(diff) / denom;
}

}  // namespace lacl
