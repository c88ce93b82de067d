#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "lacl/numcore/error.hpp"
#include "lacl/numcore/kernels.hpp"
#include "lacl/numcore/random.hpp"
#include "lacl/numcore/tape.hpp"
#include "lacl/numcore/tensor.hpp"

// Differentiable operations recorded on a Tape. Activations are rank-2
// [rows x features]; a batch of sequences is flattened to [batch*len x D].
namespace lacl::ops {

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw Error("shape-mismatch", std::string(what) + ": " + shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
  }
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2))); }

inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2)));
  const double pdf = std::exp(-0.5 * x * x) * 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return cdf + x * pdf;
}

}  // namespace detail

// y = x W + b, x [n x in], W [in x out], b [1 x out] or [out].
inline Var linear(Var x, Var w, Var b) {
  Tape& tape = *x.tape();
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  const Tensor& B = b.value();
  const std::size_t n = X.rows(), in = X.cols(), out = W.cols();
  if (W.rows() != in || B.size() != out) {
    throw Error("shape-mismatch", "linear: x " + shape_string(X.shape()) + ", W " +
                                      shape_string(W.shape()) + ", b " + shape_string(B.shape()));
  }
  Tensor Y({n, out});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < out; ++j) Y(i, j) = B[j];
  gemm_acc(X.storage().data(), W.storage().data(), Y.storage().data(), n, in, out);
  const std::size_t xi = x.id(), wi = w.id(), bi = b.id();
  return tape.record(OpKind::Linear, std::move(Y), {x, w, b},
                     [xi, wi, bi, n, in, out](Tape& t, const Tensor& g) {
                       if (Tensor* gx = t.grad_buffer(xi))
                         gemm_nt_acc(g.storage().data(), t.value(wi).storage().data(),
                                     gx->storage().data(), n, out, in);
                       if (Tensor* gw = t.grad_buffer(wi))
                         gemm_tn_acc(t.value(xi).storage().data(), g.storage().data(),
                                     gw->storage().data(), in, n, out);
                       if (Tensor* gb = t.grad_buffer(bi))
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < out; ++j) (*gb)[j] += g(i, j);
                     });
}

inline Var add(Var a, Var b) {
  detail::require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  y += b.value();
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(OpKind::Add, std::move(y), {a, b}, [ai, bi](Tape& t, const Tensor& g) {
    t.accumulate(ai, g);
    t.accumulate(bi, g);
  });
}

inline Var mul(Var a, Var b) {
  detail::require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(OpKind::Mul, std::move(y), {a, b}, [ai, bi](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(ai))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * t.value(bi)[i];
    if (Tensor* gb = t.grad_buffer(bi))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * t.value(ai)[i];
  });
}

inline Var scale(Var a, double s) {
  Tensor y = a.value();
  for (double& v : y.storage()) v *= s;
  const std::size_t ai = a.id();
  return a.tape()->record(OpKind::Scale, std::move(y), {a}, [ai, s](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(ai))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += s * g[i];
  });
}

inline Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().storage()) s += v;
  const std::size_t ai = a.id();
  return a.tape()->record(OpKind::Sum, Tensor::scalar(s), {a}, [ai](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(ai))
      for (double& v : ga->storage()) v += g[0];
  });
}

inline Var gelu(Var a) {
  Tensor y = a.value();
  for (double& v : y.storage()) v = detail::gelu(v);
  const std::size_t ai = a.id();
  return a.tape()->record(OpKind::Gelu, std::move(y), {a}, [ai](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(ai)) {
      const Tensor& x = t.value(ai);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * detail::gelu_grad(x[i]);
    }
  });
}

inline Var tanh(Var a) {
  Tensor y = a.value();
  for (double& v : y.storage()) v = std::tanh(v);
  const std::size_t ai = a.id();
  return a.tape()->record(OpKind::Tanh, y, {a}, [ai, y](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(ai))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

// Row-wise layer normalization with learned gain and bias of width D.
inline Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
  const Tensor& X = x.value();
  const std::size_t n = X.rows(), d = X.cols();
  if (gain.value().size() != d || bias.value().size() != d)
    throw Error("shape-mismatch", "layer_norm gain/bias width");
  Tensor xhat({n, d});
  std::vector<double> inv_std(n);
  Tensor y({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    auto r = X.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat(i, j) = (r[j] - mean) * inv_std[i];
      y(i, j) = xhat(i, j) * gain.value()[j] + bias.value()[j];
    }
  }
  const std::size_t xi = x.id(), gi = gain.id(), bi = bias.id();
  return x.tape()->record(
      OpKind::LayerNorm, std::move(y), {x, gain, bias},
      [xi, gi, bi, n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t,
                                                                                const Tensor& g) {
        const Tensor& G = t.value(gi);
        if (Tensor* gg = t.grad_buffer(gi))
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) (*gg)[j] += g(i, j) * xhat(i, j);
        if (Tensor* gb = t.grad_buffer(bi))
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) (*gb)[j] += g(i, j);
        if (Tensor* gx = t.grad_buffer(xi)) {
          std::vector<double> dxhat(d);
          for (std::size_t i = 0; i < n; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              dxhat[j] = g(i, j) * G[j];
              m1 += dxhat[j];
              m2 += dxhat[j] * xhat(i, j);
            }
            m1 /= static_cast<double>(d);
            m2 /= static_cast<double>(d);
            for (std::size_t j = 0; j < d; ++j)
              (*gx)(i, j) += inv_std[i] * (dxhat[j] - m1 - xhat(i, j) * m2);
          }
        }
      });
}

// Row lookup: out[i] = table[ids[i]].
inline Var gather_rows(Var table, std::vector<std::size_t> ids) {
  const Tensor& T = table.value();
  const std::size_t d = T.cols();
  Tensor y({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= T.rows()) throw Error("index-out-of-range", "gather row " + std::to_string(ids[i]));
    auto src = T.row(ids[i]);
    std::copy(src.begin(), src.end(), y.row(i).begin());
  }
  const std::size_t ti = table.id();
  return table.tape()->record(OpKind::Gather, std::move(y), {table},
                              [ti, d, ids = std::move(ids)](Tape& t, const Tensor& g) {
                                if (Tensor* gt = t.grad_buffer(ti))
                                  for (std::size_t i = 0; i < ids.size(); ++i)
                                    for (std::size_t j = 0; j < d; ++j) (*gt)(ids[i], j) += g(i, j);
                              });
}

// Inverted dropout with a mask drawn from rng; p == 0 is the identity.
inline Var dropout(Var x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  const double keep = 1.0 - p;
  Tensor mask(x.value().shape());
  for (double& m : mask.storage()) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  Tensor y = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  const std::size_t xi = x.id();
  return x.tape()->record(OpKind::Dropout, std::move(y), {x},
                          [xi, mask = std::move(mask)](Tape& t, const Tensor& g) {
                            if (Tensor* gx = t.grad_buffer(xi))
                              for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * mask[i];
                          });
}

// Multi-head scaled dot-product self-attention over `batch` sequences of
// `len` positions each. q, k, v are [batch*len x D]; key_mask[b*len + t] is
// false for padding, which is never attended to. Rows whose keys are all
// padding produce zeros.
inline Var attention(Var q, Var k, Var v, std::size_t batch, std::size_t len, std::size_t heads,
                     const std::vector<bool>& key_mask) {
  const Tensor& Q = q.value();
  const Tensor& K = k.value();
  const Tensor& V = v.value();
  const std::size_t d = Q.cols();
  if (Q.rows() != batch * len || K.shape() != Q.shape() || V.shape() != Q.shape() ||
      key_mask.size() != batch * len || d % heads != 0) {
    throw Error("shape-mismatch", "attention inputs");
  }
  const std::size_t dh = d / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  // probs laid out [batch][head][query][key]
  std::vector<double> probs(batch * heads * len * len, 0.0);
  Tensor y({batch * len, d});
  std::vector<double> scores(len);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < len; ++i) {
        const double* qi = &Q(b * len + i, off);
        double mx = -INFINITY;
        for (std::size_t j = 0; j < len; ++j) {
          if (!key_mask[b * len + j]) continue;
          const double* kj = &K(b * len + j, off);
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          scores[j] = s * inv_scale;
          mx = std::fmax(mx, scores[j]);
        }
        if (mx == -INFINITY) continue;
        double* p = &probs[((b * heads + h) * len + i) * len];
        double z = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          if (!key_mask[b * len + j]) continue;
          p[j] = std::exp(scores[j] - mx);
          z += p[j];
        }
        double* yi = &y(b * len + i, off);
        for (std::size_t j = 0; j < len; ++j) {
          if (!key_mask[b * len + j]) continue;
          p[j] /= z;
          const double* vj = &V(b * len + j, off);
          for (std::size_t c = 0; c < dh; ++c) yi[c] += p[j] * vj[c];
        }
      }
    }
  }
  const std::size_t qi_id = q.id(), ki_id = k.id(), vi_id = v.id();
  return q.tape()->record(
      OpKind::Attention, std::move(y), {q, k, v},
      [=, probs = std::move(probs)](Tape& t, const Tensor& g) {
        const Tensor& Qv = t.value(qi_id);
        const Tensor& Kv = t.value(ki_id);
        const Tensor& Vv = t.value(vi_id);
        Tensor* gq = t.grad_buffer(qi_id);
        Tensor* gk = t.grad_buffer(ki_id);
        Tensor* gv = t.grad_buffer(vi_id);
        std::vector<double> dp(len), ds(len);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * dh;
            for (std::size_t i = 0; i < len; ++i) {
              const double* p = &probs[((b * heads + h) * len + i) * len];
              const double* gi = &g(b * len + i, off);
              double dot_pg = 0.0;
              for (std::size_t j = 0; j < len; ++j) {
                if (p[j] == 0.0) {
                  dp[j] = 0.0;
                  continue;
                }
                const double* vj = &Vv(b * len + j, off);
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += gi[c] * vj[c];
                dp[j] = s;
                dot_pg += p[j] * s;
                if (gv) {
                  double* gvj = &(*gv)(b * len + j, off);
                  for (std::size_t c = 0; c < dh; ++c) gvj[c] += p[j] * gi[c];
                }
              }
              for (std::size_t j = 0; j < len; ++j) ds[j] = p[j] * (dp[j] - dot_pg) * inv_scale;
              const double* qrow = &Qv(b * len + i, off);
              for (std::size_t j = 0; j < len; ++j) {
                if (ds[j] == 0.0) continue;
                const double* kj = &Kv(b * len + j, off);
                if (gq) {
                  double* gqi = &(*gq)(b * len + i, off);
                  for (std::size_t c = 0; c < dh; ++c) gqi[c] += ds[j] * kj[c];
                }
                if (gk) {
                  double* gkj = &(*gk)(b * len + j, off);
                  for (std::size_t c = 0; c < dh; ++c) gkj[c] += ds[j] * qrow[c];
                }
              }
            }
          }
        }
      });
}

// Mean over the valid (mask == true) positions of each sequence: [batch*len x D]
// -> [batch x D]. A sequence without any valid position is an error.
inline Var masked_mean_pool(Var x, std::size_t batch, std::size_t len, const std::vector<bool>& mask) {
  const Tensor& X = x.value();
  const std::size_t d = X.cols();
  if (X.rows() != batch * len || mask.size() != batch * len)
    throw Error("shape-mismatch", "masked_mean_pool");
  Tensor y({batch, d});
  std::vector<double> counts(batch, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < len; ++t) {
      if (!mask[b * len + t]) continue;
      counts[b] += 1.0;
      auto r = X.row(b * len + t);
      for (std::size_t j = 0; j < d; ++j) y(b, j) += r[j];
    }
    if (counts[b] == 0.0) throw Error("all-pad-sequence", "sequence " + std::to_string(b));
    for (std::size_t j = 0; j < d; ++j) y(b, j) /= counts[b];
  }
  const std::size_t xi = x.id();
  return x.tape()->record(OpKind::MaskedMeanPool, std::move(y), {x},
                          [xi, batch, len, d, mask, counts = std::move(counts)](Tape& t,
                                                                                const Tensor& g) {
                            Tensor* gx = t.grad_buffer(xi);
                            if (!gx) return;
                            for (std::size_t b = 0; b < batch; ++b)
                              for (std::size_t tt = 0; tt < len; ++tt) {
                                if (!mask[b * len + tt]) continue;
                                for (std::size_t j = 0; j < d; ++j)
                                  (*gx)(b * len + tt, j) += g(b, j) / counts[b];
                              }
                          });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("shape-mismatch", "concat of nothing");
  const std::size_t n = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.value().rows() != n) throw Error("shape-mismatch", "concat_cols row counts differ");
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor y({n, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& P = parts[k].value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) y(i, off + j) = P(i, j);
    off += widths[k];
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return parts[0].tape()->record(OpKind::ConcatCols, std::move(y), parts,
                                 [ids, widths, n](Tape& t, const Tensor& g) {
                                   std::size_t off = 0;
                                   for (std::size_t k = 0; k < ids.size(); ++k) {
                                     if (Tensor* gp = t.grad_buffer(ids[k]))
                                       for (std::size_t i = 0; i < n; ++i)
                                         for (std::size_t j = 0; j < widths[k]; ++j)
                                           (*gp)(i, j) += g(i, off + j);
                                     off += widths[k];
                                   }
                                 });
}

// Columns [begin, begin + width).
inline Var slice_cols(Var x, std::size_t begin, std::size_t width) {
  const Tensor& X = x.value();
  if (begin + width > X.cols()) throw Error("shape-mismatch", "slice_cols out of range");
  const std::size_t n = X.rows();
  Tensor y({n, width});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j) y(i, j) = X(i, begin + j);
  const std::size_t xi = x.id();
  return x.tape()->record(OpKind::SliceCols, std::move(y), {x},
                          [xi, n, begin, width](Tape& t, const Tensor& g) {
                            if (Tensor* gx = t.grad_buffer(xi))
                              for (std::size_t i = 0; i < n; ++i)
                                for (std::size_t j = 0; j < width; ++j) (*gx)(i, begin + j) += g(i, j);
                          });
}

// Rows a0, b0, a1, b1, ...: pairs two views of the same examples.
inline Var interleave_rows(Var a, Var b) {
  detail::require_same_shape(a.value(), b.value(), "interleave_rows");
  const std::size_t n = a.value().rows(), d = a.value().cols();
  Tensor y({2 * n, d});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(a.value().row(i).begin(), a.value().row(i).end(), y.row(2 * i).begin());
    std::copy(b.value().row(i).begin(), b.value().row(i).end(), y.row(2 * i + 1).begin());
  }
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(OpKind::InterleaveRows, std::move(y), {a, b},
                          [ai, bi, n, d](Tape& t, const Tensor& g) {
                            Tensor* ga = t.grad_buffer(ai);
                            Tensor* gb = t.grad_buffer(bi);
                            for (std::size_t i = 0; i < n; ++i)
                              for (std::size_t j = 0; j < d; ++j) {
                                if (ga) (*ga)(i, j) += g(2 * i, j);
                                if (gb) (*gb)(i, j) += g(2 * i + 1, j);
                              }
                          });
}

// Scales every row to unit L2 norm; rows with norm <= 1e-12 are an error.
inline Var normalize_rows(Var x) {
  const Tensor& X = x.value();
  const std::size_t n = X.rows(), d = X.cols();
  Tensor y({n, d});
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = l2_norm(X.row(i));
    if (!(norms[i] > kNormEpsilon)) throw Error("degenerate-vector", "row " + std::to_string(i));
    for (std::size_t j = 0; j < d; ++j) y(i, j) = X(i, j) / norms[i];
  }
  const std::size_t xi = x.id();
  return x.tape()->record(OpKind::NormalizeRows, y, {x},
                          [xi, n, d, norms = std::move(norms), y](Tape& t, const Tensor& g) {
                            Tensor* gx = t.grad_buffer(xi);
                            if (!gx) return;
                            for (std::size_t i = 0; i < n; ++i) {
                              double proj = 0.0;
                              for (std::size_t j = 0; j < d; ++j) proj += g(i, j) * y(i, j);
                              for (std::size_t j = 0; j < d; ++j)
                                (*gx)(i, j) += (g(i, j) - proj * y(i, j)) / norms[i];
                            }
                          });
}

}  // namespace lacl::ops
