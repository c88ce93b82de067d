#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "lacl/numcore/error.hpp"
#include "lacl/numcore/kernels.hpp"
#include "lacl/numcore/ops.hpp"
#include "lacl/numcore/tape.hpp"
#include "lacl/numcore/tensor.hpp"

namespace lacl {

// ---------------------------------------------------------------------------
// Supervised contrastive loss over an augmented batch.
//
// For anchor i with positives P(i) (same label, excluding i):
//   term_i = -log( sum_{j in P(i)} exp(z_i.z_j / tau) / sum_{k != i} exp(z_i.z_k / tau) )
// The sum over positives sits inside the log. The loss is the mean of term_i.
// ---------------------------------------------------------------------------

namespace detail {

struct SclEval {
  double loss = 0.0;
  // d loss / d s_ik where s_ik = z_i.z_k / tau, row-major [n x n].
  std::vector<double> dlogits;
};

inline SclEval scl_evaluate(const Tensor& z, std::span<const int> labels, double tau, bool want_grad) {
  if (!(tau > 0.0)) throw Error("invalid-temperature", "tau must be positive");
  const std::size_t n = z.rows();
  const std::size_t d = z.cols();
  if (labels.size() != n) throw Error("shape-mismatch", "labels vs rows of Z");
  std::vector<double> s(n * n, 0.0);
  gemm_nt_acc(z.storage().data(), z.storage().data(), s.data(), n, d, n);
  for (double& v : s) v /= tau;

  SclEval out;
  if (want_grad) out.dlogits.assign(n * n, 0.0);
  std::vector<double> e(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* si = &s[i * n];
    double mx = -INFINITY;
    bool has_positive = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      mx = std::max(mx, si[k]);
      has_positive = has_positive || labels[k] == labels[i];
    }
    if (!has_positive) throw Error("anchor-without-positive", "anchor " + std::to_string(i));
    double denom = 0.0, num = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) {
        e[k] = 0.0;
        continue;
      }
      e[k] = std::exp(si[k] - mx);
      denom += e[k];
      if (labels[k] == labels[i]) num += e[k];
    }
    out.loss += (std::log(denom) - std::log(num)) * inv_n;
    if (want_grad) {
      double* gi = &out.dlogits[i * n];
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i) continue;
        const double pos = labels[k] == labels[i] ? e[k] / num : 0.0;
        gi[k] = (e[k] / denom - pos) * inv_n;
      }
    }
  }
  return out;
}

}  // namespace detail

// Value-only evaluation. z rows are expected to be L2-normalized.
inline double scl_loss(const Tensor& z, std::span<const int> labels, double tau) {
  return detail::scl_evaluate(z, labels, tau, false).loss;
}

namespace ops {

inline Var scl_loss(Var z, std::vector<int> labels, double tau) {
  const Tensor& Z = z.value();
  auto eval = lacl::detail::scl_evaluate(Z, labels, tau, z.tape()->grad_enabled());
  const std::size_t zi = z.id();
  const std::size_t n = Z.rows(), d = Z.cols();
  return z.tape()->record(
      OpKind::SclLoss, Tensor::scalar(eval.loss), {z},
      [zi, n, d, tau, g_s = std::move(eval.dlogits)](Tape& t, const Tensor& g) {
        Tensor* gz = t.grad_buffer(zi);
        if (!gz) return;
        const Tensor& Zv = t.value(zi);
        // dZ = (G + G^T) Z / tau, scaled by the upstream gradient.
        std::vector<double> sym(n * n);
        const double c = g[0] / tau;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < n; ++k) sym[i * n + k] = (g_s[i * n + k] + g_s[k * n + i]) * c;
        gemm_acc(sym.data(), Zv.storage().data(), gz->storage().data(), n, n, d);
      });
}

}  // namespace ops

// ---------------------------------------------------------------------------
// Correlation regularization.
//
// C is [batch x (layers * width)]: the compressed vectors c^1..c^L of each
// augmented example laid side by side, as produced by the GCL.
// ---------------------------------------------------------------------------

// Cosine between two batch columns; 0 when either column norm is below 1e-12.
inline double column_correlation(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (!(na > kNormEpsilon) || !(nb > kNormEpsilon)) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

namespace detail {

inline void require_layout(const Tensor& c, std::size_t layers) {
  if (layers == 0 || c.rank() != 2 || c.cols() % layers != 0)
    throw Error("shape-mismatch", "compressed width not divisible by layer count");
}

inline void require_margin(const Tensor& c, double margin) {
  if (!(margin > 0.0 && margin <= 1.0)) throw Error("invalid-margin", "margin must lie in (0, 1]");
  if (c.rows() < 2) throw Error("batch-too-small", "correlation needs at least 2 rows");
}

inline std::vector<double> column(const Tensor& c, std::size_t col) {
  std::vector<double> out(c.rows());
  for (std::size_t b = 0; b < c.rows(); ++b) out[b] = c(b, col);
  return out;
}

}  // namespace detail

// Correlation of dimension d between layer `pair` and layer `pair + 1`
// (both 0-based) across the batch axis.
inline double adjacent_correlation(const Tensor& c, std::size_t layers, std::size_t pair, std::size_t d) {
  lacl::detail::require_layout(c, layers);
  const std::size_t width = c.cols() / layers;
  if (pair + 1 >= layers || d >= width) throw Error("index-out-of-range", "adjacent_correlation");
  const auto a = lacl::detail::column(c, pair * width + d);
  const auto b = lacl::detail::column(c, (pair + 1) * width + d);
  return column_correlation(a, b);
}

// Sum of adjacent-layer correlations that reach the margin:
//   sum_l sum_{d : cor_l^d >= m} cor_l^d
inline double cr_loss(const Tensor& c, std::size_t layers, double margin) {
  lacl::detail::require_layout(c, layers);
  lacl::detail::require_margin(c, margin);
  const std::size_t width = c.cols() / layers;
  double total = 0.0;
  for (std::size_t l = 0; l + 1 < layers; ++l)
    for (std::size_t d = 0; d < width; ++d) {
      const double cor = adjacent_correlation(c, layers, l, d);
      if (cor >= margin) total += cor;
    }
  return total;
}

// Mean of all adjacent correlations (every pair, every dimension); a training
// diagnostic rather than part of the objective.
inline double mean_adjacent_correlation(const Tensor& c, std::size_t layers) {
  lacl::detail::require_layout(c, layers);
  const std::size_t width = c.cols() / layers;
  if (layers < 2) return 0.0;
  double total = 0.0;
  for (std::size_t l = 0; l + 1 < layers; ++l)
    for (std::size_t d = 0; d < width; ++d) total += adjacent_correlation(c, layers, l, d);
  return total / static_cast<double>((layers - 1) * width);
}

namespace ops {

// Differentiable CR loss. Margin selection is a constant: no gradient flows
// through the indicator.
inline Var cr_loss(Var c, std::size_t layers, double margin) {
  const Tensor& C = c.value();
  lacl::detail::require_layout(C, layers);
  lacl::detail::require_margin(C, margin);
  const std::size_t n = C.rows();
  const std::size_t width = C.cols() / layers;
  struct Selected {
    std::size_t col_a, col_b;
    double cor, norm_a, norm_b;
  };
  std::vector<Selected> picked;
  double total = 0.0;
  for (std::size_t l = 0; l + 1 < layers; ++l)
    for (std::size_t d = 0; d < width; ++d) {
      const std::size_t ca = l * width + d, cb = (l + 1) * width + d;
      const auto a = lacl::detail::column(C, ca);
      const auto b = lacl::detail::column(C, cb);
      const double na = l2_norm(a), nb = l2_norm(b);
      if (!(na > kNormEpsilon) || !(nb > kNormEpsilon)) continue;
      const double cor = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
      if (cor >= margin) {
        total += cor;
        picked.push_back({ca, cb, cor, na, nb});
      }
    }
  const std::size_t ci = c.id();
  return c.tape()->record(OpKind::CrLoss, Tensor::scalar(total), {c},
                          [ci, n, picked = std::move(picked)](Tape& t, const Tensor& g) {
                            Tensor* gc = t.grad_buffer(ci);
                            if (!gc) return;
                            const Tensor& Cv = t.value(ci);
                            for (const auto& s : picked) {
                              const double inv_ab = 1.0 / (s.norm_a * s.norm_b);
                              const double ka = s.cor / (s.norm_a * s.norm_a);
                              const double kb = s.cor / (s.norm_b * s.norm_b);
                              for (std::size_t b = 0; b < n; ++b) {
                                const double va = Cv(b, s.col_a), vb = Cv(b, s.col_b);
                                (*gc)(b, s.col_a) += g[0] * (vb * inv_ab - ka * va);
                                (*gc)(b, s.col_b) += g[0] * (va * inv_ab - kb * vb);
                              }
                            }
                          });
}

// Mean softmax cross-entropy of logits [batch x classes] against labels.
inline Var softmax_cross_entropy(Var logits, std::vector<int> labels) {
  const Tensor& X = logits.value();
  const std::size_t n = X.rows(), k = X.cols();
  if (labels.size() != n) throw Error("shape-mismatch", "labels vs logits rows");
  Tensor probs({n, k});
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k)
      throw Error("label-out-of-range", std::to_string(labels[i]));
    auto r = X.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      probs(i, j) = std::exp(r[j] - mx);
      z += probs(i, j);
    }
    for (std::size_t j = 0; j < k; ++j) probs(i, j) /= z;
    loss += -(r[labels[i]] - mx - std::log(z));
  }
  loss /= static_cast<double>(n);
  const std::size_t li = logits.id();
  return logits.tape()->record(OpKind::SoftmaxCrossEntropy, Tensor::scalar(loss), {logits},
                               [li, n, k, labels = std::move(labels), probs = std::move(probs)](
                                   Tape& t, const Tensor& g) {
                                 Tensor* gl = t.grad_buffer(li);
                                 if (!gl) return;
                                 const double c = g[0] / static_cast<double>(n);
                                 for (std::size_t i = 0; i < n; ++i)
                                   for (std::size_t j = 0; j < k; ++j) {
                                     const double y = static_cast<int>(j) == labels[i] ? 1.0 : 0.0;
                                     (*gl)(i, j) += c * (probs(i, j) - y);
                                   }
                               });
}

}  // namespace ops

// ---------------------------------------------------------------------------
// Combined objective.
// ---------------------------------------------------------------------------

struct LossBreakdown {
  double scl = 0.0;
  double cr = 0.0;
  double total = 0.0;
  double lambda1 = 1.0;
};

inline LossBreakdown total_loss(double scl, double cr, double lambda1) {
  if (lambda1 < 0.0) throw Error("invalid-weight", "lambda1 must be non-negative");
  return {scl, cr, scl + lambda1 * cr, lambda1};
}

namespace ops {

inline Var total_loss(Var scl, Var cr, double lambda1) {
  if (lambda1 < 0.0) throw Error("invalid-weight", "lambda1 must be non-negative");
  if (lambda1 == 0.0) return scl;
  return add(scl, scale(cr, lambda1));
}

}  // namespace ops

}  // namespace lacl
