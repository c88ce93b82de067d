#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lacl/data/vocab.hpp"
#include "lacl/numcore/error.hpp"
#include "lacl/numcore/ops.hpp"
#include "lacl/numcore/random.hpp"
#include "lacl/numcore/tape.hpp"
#include "lacl/numcore/tensor.hpp"

namespace lacl {

struct EncoderConfig {
  std::size_t layers = 4;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t ff_mult = 4;
  double dropout = 0.1;
  std::size_t max_len = 32;
  std::size_t vocab_size = 0;

  // Width of each per-layer compressed vector, hidden / layers.
  std::size_t compressed_width() const { return hidden / layers; }

  void validate() const {
    if (layers == 0) throw Error("invalid-config", "layers must be positive");
    if (hidden == 0 || hidden % layers != 0) throw Error("invalid-config", "hidden must be divisible by layers");
    if (heads == 0 || hidden % heads != 0) throw Error("invalid-config", "hidden must be divisible by heads");
    if (ff_mult == 0) throw Error("invalid-config", "ff_mult must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("invalid-config", "dropout must lie in [0, 1)");
    if (max_len == 0) throw Error("invalid-config", "max_len must be positive");
    if (vocab_size < 3) throw Error("invalid-config", "vocab_size must cover the reserved tokens");
  }
};

namespace detail {

inline void init_normal(ParamStore& store, const std::string& name, std::vector<std::size_t> shape,
                        double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = stddev * rng.normal();
  store[name] = Parameter{t, Tensor::zeros_like(t)};
}

inline void init_const(ParamStore& store, const std::string& name, std::vector<std::size_t> shape, double v) {
  Tensor t(std::move(shape), v);
  store[name] = Parameter{t, Tensor::zeros_like(t)};
}

}  // namespace detail

// Adds a dense layer "<prefix>.w" [in x out] and "<prefix>.b" [out].
inline void init_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  detail::init_normal(store, prefix + ".w", {in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  detail::init_const(store, prefix + ".b", {out}, 0.0);
}

inline std::string layer_prefix(std::size_t l) { return "enc.l" + std::to_string(l); }

inline void init_encoder(ParamStore& store, const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.hidden;
  detail::init_normal(store, "enc.tok_emb", {cfg.vocab_size, d}, 0.1, rng);
  detail::init_normal(store, "enc.pos_emb", {cfg.max_len, d}, 0.1, rng);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = layer_prefix(l);
    detail::init_const(store, p + ".ln1.g", {d}, 1.0);
    detail::init_const(store, p + ".ln1.b", {d}, 0.0);
    init_linear(store, p + ".attn.q", d, d, rng);
    init_linear(store, p + ".attn.k", d, d, rng);
    init_linear(store, p + ".attn.v", d, d, rng);
    init_linear(store, p + ".attn.o", d, d, rng);
    detail::init_const(store, p + ".ln2.g", {d}, 1.0);
    detail::init_const(store, p + ".ln2.b", {d}, 0.0);
    init_linear(store, p + ".ff.in", d, d * cfg.ff_mult, rng);
    init_linear(store, p + ".ff.out", d * cfg.ff_mult, d, rng);
  }
}

// Sequences right-padded with PAD to a common length. mask is false at PAD.
struct TokenBatch {
  std::vector<std::size_t> ids;
  std::vector<bool> mask;
  std::size_t batch = 0;
  std::size_t len = 0;
};

inline TokenBatch pad_batch(const std::vector<std::vector<int>>& seqs, const EncoderConfig& cfg) {
  TokenBatch tb;
  tb.batch = seqs.size();
  if (tb.batch == 0) throw Error("empty-batch");
  for (const auto& s : seqs) {
    if (s.size() > cfg.max_len)
      throw Error("sequence-too-long", std::to_string(s.size()) + " > max_len " + std::to_string(cfg.max_len));
    tb.len = std::max(tb.len, s.size());
  }
  if (tb.len == 0) throw Error("empty-sequence");
  tb.ids.assign(tb.batch * tb.len, Vocabulary::kPad);
  tb.mask.assign(tb.batch * tb.len, false);
  for (std::size_t b = 0; b < tb.batch; ++b)
    for (std::size_t t = 0; t < seqs[b].size(); ++t) {
      const int id = seqs[b][t];
      if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size)
        throw Error("unknown-token", "id " + std::to_string(id));
      tb.ids[b * tb.len + t] = static_cast<std::size_t>(id);
      tb.mask[b * tb.len + t] = id != Vocabulary::kPad;
    }
  return tb;
}

// Per-layer token states H^l as tape nodes, each [batch*len x hidden].
struct EncodedBatch {
  std::vector<Var> layers;
  TokenBatch tokens;
};

// Pre-norm transformer: token + learned positional embeddings, then per block
// x += Drop(Attn(LN(x))); x += Drop(FF(LN(x))). H^l is the output of block l.
// Dropout is active only in train mode and its masks derive from `seed`.
// A const store yields frozen parameters (inference).
template <typename Store>
EncodedBatch encode(Tape& tape, Store& params, const EncoderConfig& cfg, TokenBatch tokens,
                           bool train_mode, std::uint64_t seed) {
  const double p = train_mode ? cfg.dropout : 0.0;
  Rng rng(seed);
  auto P = [&](const std::string& name) { return tape.param(param_at(params, name)); };
  auto dense = [&](Var x, const std::string& prefix) {
    return ops::linear(x, P(prefix + ".w"), P(prefix + ".b"));
  };

  std::vector<std::size_t> positions(tokens.ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i % tokens.len;
  Var x = ops::add(ops::gather_rows(P("enc.tok_emb"), tokens.ids), ops::gather_rows(P("enc.pos_emb"), positions));
  x = ops::dropout(x, p, rng);

  EncodedBatch out;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string pre = layer_prefix(l);
    Var h = ops::layer_norm(x, P(pre + ".ln1.g"), P(pre + ".ln1.b"));
    Var att = ops::attention(dense(h, pre + ".attn.q"), dense(h, pre + ".attn.k"), dense(h, pre + ".attn.v"),
                             tokens.batch, tokens.len, cfg.heads, tokens.mask);
    x = ops::add(x, ops::dropout(dense(att, pre + ".attn.o"), p, rng));
    Var f = ops::layer_norm(x, P(pre + ".ln2.g"), P(pre + ".ln2.b"));
    f = dense(ops::gelu(dense(f, pre + ".ff.in")), pre + ".ff.out");
    x = ops::add(x, ops::dropout(f, p, rng));
    out.layers.push_back(x);
  }
  out.tokens = std::move(tokens);
  return out;
}

// Mean-pooled h^l over non-PAD positions for every layer: L nodes of [batch x hidden].
inline std::vector<Var> pool_layers(const EncodedBatch& enc) {
  std::vector<Var> pooled;
  pooled.reserve(enc.layers.size());
  for (const Var& h : enc.layers)
    pooled.push_back(ops::masked_mean_pool(h, enc.tokens.batch, enc.tokens.len, enc.tokens.mask));
  return pooled;
}

// ---------------------------------------------------------------------------
// Value-level interface.
// ---------------------------------------------------------------------------

// H^l for l = 1..L, each of shape [batch x len x hidden], plus the PAD mask.
struct LayerStates {
  std::vector<Tensor> layers;
  std::vector<bool> mask;
  std::size_t batch = 0;
  std::size_t len = 0;
};

// One [batch x hidden] matrix of pooled vectors per layer.
using PooledStates = std::vector<Tensor>;

inline LayerStates forward(const ParamStore& params, const EncoderConfig& cfg,
                           const std::vector<std::vector<int>>& seqs, bool train_mode, std::uint64_t seed) {
  cfg.validate();
  Tape tape(false);
  auto enc = encode(tape, params, cfg, pad_batch(seqs, cfg), train_mode, seed);
  LayerStates st;
  st.batch = enc.tokens.batch;
  st.len = enc.tokens.len;
  st.mask = enc.tokens.mask;
  for (const Var& h : enc.layers) st.layers.emplace_back(std::vector<std::size_t>{st.batch, st.len, cfg.hidden},
                                                         h.value().storage());
  return st;
}

inline PooledStates pool_layers(const LayerStates& st) {
  PooledStates out;
  for (const Tensor& h : st.layers) {
    if (h.rank() != 3 || h.shape()[0] != st.batch || h.shape()[1] != st.len)
      throw Error("shape-mismatch", "layer state shape");
    const std::size_t d = h.shape()[2];
    Tensor pooled({st.batch, d});
    for (std::size_t b = 0; b < st.batch; ++b) {
      double count = 0.0;
      for (std::size_t t = 0; t < st.len; ++t) {
        if (!st.mask[b * st.len + t]) continue;
        count += 1.0;
        for (std::size_t j = 0; j < d; ++j) pooled(b, j) += h[(b * st.len + t) * d + j];
      }
      if (count == 0.0) throw Error("all-pad-sequence", "sequence " + std::to_string(b));
      for (std::size_t j = 0; j < d; ++j) pooled(b, j) /= count;
    }
    out.push_back(std::move(pooled));
  }
  return out;
}

}  // namespace lacl
