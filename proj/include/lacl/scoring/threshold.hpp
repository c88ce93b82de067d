#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "lacl/numcore/error.hpp"

namespace lacl {

enum class Decision { Ind, Ood };

// Largest δ such that at least a `tpr` fraction of ind_scores is >= δ: the
// ceil(tpr * n)-th largest score. tpr = 1 gives the minimum.
inline double threshold_at_tpr(std::span<const double> ind_scores, double tpr) {
  if (ind_scores.empty()) throw Error("empty-scores", "threshold needs IND scores");
  if (!(tpr > 0.0 && tpr <= 1.0)) throw Error("invalid-tpr", "tpr must lie in (0, 1]");
  std::vector<double> sorted(ind_scores.begin(), ind_scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double n = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(tpr * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

inline Decision decide(double score, double delta) { return score >= delta ? Decision::Ind : Decision::Ood; }

}  // namespace lacl
