#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lacl/data/corpus.hpp"
#include "lacl/data/vocab.hpp"
#include "lacl/encoder/encoder.hpp"
#include "lacl/head/gcl.hpp"
#include "lacl/numcore/error.hpp"
#include "lacl/numcore/kernels.hpp"
#include "lacl/numcore/random.hpp"
#include "lacl/numcore/tape.hpp"

namespace lacl {

enum class TrainMode { Lacl, CeBaseline };
enum class TrainVariant { Full, UpperHalfTrain };

inline TrainMode parse_mode(const std::string& s) {
  if (s == "lacl") return TrainMode::Lacl;
  if (s == "ce" || s == "ce_baseline") return TrainMode::CeBaseline;
  throw Error("invalid-config", "mode must be lacl or ce, got " + s);
}

inline std::string to_string(TrainMode m) { return m == TrainMode::Lacl ? "lacl" : "ce_baseline"; }

inline TrainVariant parse_variant(const std::string& s) {
  if (s == "full") return TrainVariant::Full;
  if (s == "upper_half_train" || s == "upper-half-train") return TrainVariant::UpperHalfTrain;
  throw Error("invalid-config", "variant must be full or upper_half_train, got " + s);
}

inline std::string to_string(TrainVariant v) { return v == TrainVariant::Full ? "full" : "upper_half_train"; }

// First (0-based) layer of the upper half: for L = 4 the upper half is layers
// 3 and 4 (1-based); an odd L keeps the middle layer.
inline std::size_t upper_half_begin(std::size_t layers) { return layers / 2; }

struct ModelOptions {
  TrainMode mode = TrainMode::Lacl;
  TrainVariant variant = TrainVariant::Full;
  GclSharing sharing = GclSharing::Shared;
  std::size_t gcl_hidden = 0;  // 0 means 2 * hidden
};

struct Model {
  EncoderConfig encoder;
  GclConfig gcl;
  ModelOptions options;
  Vocabulary vocab;
  std::vector<std::string> label_names;
  ParamStore params;

  bool is_lacl() const { return options.mode == TrainMode::Lacl; }

  // Index of the first encoder layer routed into the GCL.
  std::size_t gcl_first_layer() const {
    return options.variant == TrainVariant::UpperHalfTrain ? upper_half_begin(encoder.layers) : 0;
  }

  // Token ids for a text, truncated to max_len.
  std::vector<int> tokens(const std::string& text) const {
    auto ids = vocab.encode(text);
    if (ids.empty()) throw Error("empty-text", "'" + text + "' has no tokens");
    if (ids.size() > encoder.max_len) ids.resize(encoder.max_len);
    return ids;
  }

  std::vector<int> tokens(const LabeledExample& ex) const { return tokens(ex.text); }
};

inline GclConfig make_gcl_config(const EncoderConfig& enc, const ModelOptions& opt) {
  GclConfig g;
  g.input_dim = enc.hidden;
  g.hidden = opt.gcl_hidden ? opt.gcl_hidden : 2 * enc.hidden;
  g.output_dim = enc.compressed_width();
  g.sharing = opt.sharing;
  g.layers = opt.variant == TrainVariant::UpperHalfTrain ? enc.layers - upper_half_begin(enc.layers) : enc.layers;
  return g;
}

// Fresh model. vocab_size in `enc` is overwritten from the vocabulary.
inline Model init_model(EncoderConfig enc, const ModelOptions& opt, Vocabulary vocab,
                        std::vector<std::string> label_names, std::uint64_t seed) {
  enc.vocab_size = vocab.size();
  enc.validate();
  if (label_names.empty()) throw Error("invalid-config", "no labels");
  Model m{enc, make_gcl_config(enc, opt), opt, std::move(vocab), std::move(label_names), {}};
  Rng rng(derive_seed({seed, 0x696e6974}));
  init_encoder(m.params, m.encoder, rng);
  if (m.is_lacl()) {
    init_gcl(m.params, m.gcl, rng);
  } else {
    init_linear(m.params, "head", enc.hidden, m.label_names.size(), rng);
  }
  return m;
}

// Deterministic inference outputs for a list of examples.
struct Embeddings {
  std::vector<Tensor> pooled;      // h^l for every encoder layer, each [N x D]
  std::vector<Tensor> compressed;  // c^l for the GCL-routed layers (LaCL only)
  std::size_t compressed_begin = 0;
  Tensor z;                        // representation, rows L2-normalized
  Tensor logits;                   // CE baseline only

  std::size_t size() const { return z.empty() ? 0 : z.rows(); }
};

namespace detail {

inline void append_rows(Tensor& dst, const Tensor& src) {
  if (dst.empty()) {
    dst = src;
    return;
  }
  std::vector<double> data = dst.storage();
  data.insert(data.end(), src.storage().begin(), src.storage().end());
  dst = Tensor({dst.rows() + src.rows(), src.cols()}, std::move(data));
}

inline Tensor normalize_each_row(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto unit = l2_normalize(x.row(i));
    std::copy(unit.begin(), unit.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace detail

// LaCL: z is the normalized GCL concatenation. CE baseline: z is the
// normalized last-layer pooled vector.
inline Embeddings embed(const Model& model, const std::vector<LabeledExample>& examples,
                        std::size_t batch_size = 64) {
  if (examples.empty()) throw Error("empty-batch", "no examples to embed");
  Embeddings out;
  out.pooled.resize(model.encoder.layers);
  out.compressed_begin = model.gcl_first_layer();
  Tensor raw_z;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    std::vector<std::vector<int>> seqs;
    for (std::size_t i = start; i < end; ++i) seqs.push_back(model.tokens(examples[i]));
    Tape tape(false);
    auto enc = encode(tape, model.params, model.encoder, pad_batch(seqs, model.encoder), false, 0);
    auto pooled = pool_layers(enc);
    for (std::size_t l = 0; l < pooled.size(); ++l) detail::append_rows(out.pooled[l], pooled[l].value());
    if (model.is_lacl()) {
      std::vector<Var> routed(pooled.begin() + static_cast<std::ptrdiff_t>(out.compressed_begin), pooled.end());
      auto g = gcl_compress(tape, model.params, model.gcl, routed);
      if (out.compressed.empty()) out.compressed.resize(g.compressed.size());
      for (std::size_t l = 0; l < g.compressed.size(); ++l)
        detail::append_rows(out.compressed[l], g.compressed[l].value());
      detail::append_rows(raw_z, g.ensemble.value());
    } else {
      const Var& last = pooled.back();
      Var logits = ops::linear(last, tape.param(param_at(model.params, "head.w")),
                               tape.param(param_at(model.params, "head.b")));
      detail::append_rows(out.logits, logits.value());
      detail::append_rows(raw_z, last.value());
    }
  }
  out.z = detail::normalize_each_row(raw_z);
  return out;
}

}  // namespace lacl
