#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "lacl/encoder/encoder.hpp"
#include "lacl/numcore/error.hpp"
#include "lacl/numcore/kernels.hpp"
#include "lacl/numcore/ops.hpp"
#include "lacl/numcore/tape.hpp"

namespace lacl {

enum class GclSharing { Shared, PerLayer };

inline GclSharing parse_sharing(const std::string& s) {
  if (s == "shared") return GclSharing::Shared;
  if (s == "per_layer") return GclSharing::PerLayer;
  throw Error("invalid-config", "gcl sharing must be shared or per_layer, got " + s);
}

inline std::string to_string(GclSharing s) { return s == GclSharing::Shared ? "shared" : "per_layer"; }

// Global compression layer: a two-layer MLP mapping each pooled h^l (width
// input_dim) to c^l (width output_dim) with GELU between the maps.
struct GclConfig {
  std::size_t input_dim = 64;
  std::size_t hidden = 128;
  std::size_t output_dim = 16;
  GclSharing sharing = GclSharing::Shared;
  // Number of encoder layers routed into the GCL (the last `layers` ones).
  std::size_t layers = 4;

  std::size_t ensemble_dim() const { return output_dim * layers; }

  void validate() const {
    if (input_dim == 0 || hidden == 0 || output_dim == 0 || layers == 0)
      throw Error("invalid-config", "gcl dimensions must be positive");
  }
};

inline std::string gcl_prefix(const GclConfig& cfg, std::size_t slot) {
  return cfg.sharing == GclSharing::Shared ? std::string("gcl") : "gcl.l" + std::to_string(slot);
}

inline void init_gcl(ParamStore& store, const GclConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t sets = cfg.sharing == GclSharing::Shared ? 1 : cfg.layers;
  for (std::size_t s = 0; s < sets; ++s) {
    const std::string p = gcl_prefix(cfg, s);
    init_linear(store, p + ".in", cfg.input_dim, cfg.hidden, rng);
    init_linear(store, p + ".out", cfg.hidden, cfg.output_dim, rng);
  }
}

struct GclVars {
  std::vector<Var> compressed;  // c^l, each [batch x output_dim]
  Var ensemble;                 // z = c^1 (+) ... (+) c^L, [batch x ensemble_dim]
};

// `pooled` holds exactly the layers routed into the GCL, in layer order.
template <typename Store>
GclVars gcl_compress(Tape& tape, Store& params, const GclConfig& cfg, const std::vector<Var>& pooled) {
  if (pooled.size() != cfg.layers)
    throw Error("shape-mismatch", "gcl expects " + std::to_string(cfg.layers) + " pooled layers, got " +
                                      std::to_string(pooled.size()));
  GclVars out;
  for (std::size_t l = 0; l < pooled.size(); ++l) {
    if (pooled[l].value().cols() != cfg.input_dim) throw Error("shape-mismatch", "pooled width vs gcl input");
    const std::string p = gcl_prefix(cfg, l);
    auto P = [&](const std::string& name) { return tape.param(param_at(params, p + name)); };
    Var hidden = ops::gelu(ops::linear(pooled[l], P(".in.w"), P(".in.b")));
    out.compressed.push_back(ops::linear(hidden, P(".out.w"), P(".out.b")));
  }
  out.ensemble = ops::concat_cols(out.compressed);
  return out;
}

// Value-level results for a batch.
struct CompressedStates {
  std::vector<Tensor> layers;  // c^l, [batch x output_dim]
};

struct EnsembleRepresentation {
  Tensor z;  // raw concatenation [batch x ensemble_dim]

  // Row-wise L2-normalized z; throws degenerate-vector for a zero row.
  Tensor normalized() const {
    Tensor out = z;
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto unit = l2_normalize(z.row(i));
      std::copy(unit.begin(), unit.end(), out.row(i).begin());
    }
    return out;
  }
};

inline std::pair<CompressedStates, EnsembleRepresentation> gcl_forward(const PooledStates& pooled,
                                                                       const ParamStore& params,
                                                                       const GclConfig& cfg) {
  Tape tape(false);
  std::vector<Var> in;
  for (const Tensor& h : pooled) in.push_back(tape.constant(h));
  auto vars = gcl_compress(tape, params, cfg, in);
  CompressedStates cs;
  for (const Var& c : vars.compressed) cs.layers.push_back(c.value());
  return {std::move(cs), EnsembleRepresentation{vars.ensemble.value()}};
}

}  // namespace lacl
