#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lacl/data/corpus.hpp"
#include "lacl/numcore/error.hpp"
#include "lacl/numcore/kernels.hpp"
#include "lacl/numcore/tensor.hpp"
#include "lacl/scoring/cosine.hpp"
#include "lacl/scoring/mahalanobis.hpp"
#include "lacl/trainer/model.hpp"

namespace lacl {

enum class SliceMode { Full, UpperHalf };
enum class LayerFeature { Pooled, Compressed };

struct Provenance {
  std::string checkpoint_id;
  std::string corpus_id;
};

// Inference outputs for the training split, with labels.
struct EmbeddingBank {
  Embeddings emb;
  std::vector<int> labels;
  Provenance provenance;

  std::size_t size() const { return labels.size(); }
  std::size_t num_layers() const { return emb.pooled.size(); }
};

inline std::vector<int> labels_of(const std::vector<LabeledExample>& examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.label);
  return out;
}

inline EmbeddingBank build_bank(const Model& model, const std::vector<LabeledExample>& train,
                                Provenance provenance = {}) {
  for (const auto& ex : train)
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= model.label_names.size())
      throw Error("label-mismatch", "bank example label outside the checkpoint's label set");
  return {embed(model, train), labels_of(train), std::move(provenance)};
}

// z restricted to the requested segment. The upper half covers compressed
// vectors of layers upper_half_begin(L)..L; z of a model trained on only the
// upper half already is that segment.
inline Tensor z_segment(const Embeddings& e, SliceMode mode) {
  if (mode == SliceMode::Full) return e.z;
  if (e.compressed.empty())
    throw Error("unsupported-slice", "upper-half slicing needs a layered z (LaCL checkpoint)");
  const std::size_t layers = e.pooled.size();
  const std::size_t width = e.z.cols() / e.compressed.size();
  const std::size_t first = std::max(upper_half_begin(layers), e.compressed_begin);
  const std::size_t offset = (first - e.compressed_begin) * width;
  return slice_columns(e.z, offset, e.z.cols() - offset);
}

// Cosine-NN score of one z (full-width) against the bank; the slice is applied
// to both sides before comparison.
inline NearestNeighbor cosine_score(std::span<const double> z, const EmbeddingBank& bank, SliceMode mode) {
  Embeddings q;
  q.pooled.resize(bank.emb.pooled.size());
  q.compressed.resize(bank.emb.compressed.size());
  q.compressed_begin = bank.emb.compressed_begin;
  q.z = Tensor({1, z.size()}, std::vector<double>(z.begin(), z.end()));
  const Tensor qz = z_segment(q, mode);
  return cosine_nearest(qz.row(0), z_segment(bank.emb, mode), bank.labels);
}

inline std::vector<NearestNeighbor> cosine_scores(const Embeddings& queries, const EmbeddingBank& bank,
                                                  SliceMode mode) {
  const Tensor qz = z_segment(queries, mode);
  const Tensor bz = z_segment(bank.emb, mode);
  std::vector<NearestNeighbor> out;
  out.reserve(qz.rows());
  for (std::size_t i = 0; i < qz.rows(); ++i) out.push_back(cosine_nearest(qz.row(i), bz, bank.labels));
  return out;
}

inline const std::vector<Tensor>& layer_features(const Embeddings& e, LayerFeature f) {
  if (f == LayerFeature::Pooled) return e.pooled;
  if (e.compressed.empty()) throw Error("missing-layer-bank", "no compressed layers in this checkpoint");
  return e.compressed;
}

// ---------------------------------------------------------------------------
// Explicit ensembles.
// ---------------------------------------------------------------------------

struct EnsembleResult {
  double score = 0.0;
  int label = -1;
};

// Σ_l max_i cos(x^l, bank_i^l). The prediction is the bank entry with the
// largest summed similarity (ties keep the lowest index).
inline EnsembleResult cosine_ensemble_score(const std::vector<std::span<const double>>& query,
                                            const std::vector<Tensor>& bank_layers, std::span<const int> labels) {
  if (bank_layers.empty() || query.size() != bank_layers.size())
    throw Error("missing-layer-bank", "query has " + std::to_string(query.size()) + " layers, bank has " +
                                          std::to_string(bank_layers.size()));
  const std::size_t n = bank_layers.front().rows();
  std::vector<double> joint(n, 0.0);
  EnsembleResult out;
  for (std::size_t l = 0; l < query.size(); ++l) {
    double best = -2.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = cosine_similarity(query[l], bank_layers[l].row(i));
      joint[i] += s;
      best = std::max(best, s);
    }
    out.score += best;
  }
  std::size_t arg = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (joint[i] > joint[arg]) arg = i;
  out.label = labels[arg];
  return out;
}

inline std::vector<double> tanh_copy(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  for (double& v : out) v = std::tanh(v);
  return out;
}

inline Tensor tanh_copy(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.storage()) v = std::tanh(v);
  return out;
}

// One Gaussian fit per layer: tanh-mapped features for every layer but the
// last, raw features for the last.
struct MahalanobisEnsemble {
  std::vector<GaussianStats> layers;

  static MahalanobisEnsemble fit(const std::vector<Tensor>& features, std::span<const int> labels,
                                 double ridge = 1e-6) {
    if (features.empty()) throw Error("missing-layer-bank", "no layers to fit");
    MahalanobisEnsemble e;
    for (std::size_t l = 0; l < features.size(); ++l) {
      const bool last = l + 1 == features.size();
      e.layers.push_back(mahalanobis_fit(last ? features[l] : tanh_copy(features[l]), labels, ridge));
    }
    return e;
  }

  // -(D(x^L) + Σ_{l<L} D(tanh x^l)) where D is the min over classes. The
  // prediction minimizes the per-class distance summed over layers.
  EnsembleResult score(const std::vector<std::span<const double>>& query) const {
    if (query.size() != layers.size())
      throw Error("missing-layer-bank", "query has " + std::to_string(query.size()) + " layers, fit has " +
                                            std::to_string(layers.size()));
    const auto k = static_cast<std::size_t>(layers.front().means.rows());
    std::vector<double> per_class(k, 0.0);
    double total = 0.0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const bool last = l + 1 == layers.size();
      const std::vector<double> x = last ? std::vector<double>(query[l].begin(), query[l].end()) : tanh_copy(query[l]);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_mahalanobis(x, layers[l], static_cast<Eigen::Index>(c));
        per_class[c] += d;
        best = std::min(best, d);
      }
      total += best;
    }
    std::size_t arg = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (per_class[c] < per_class[arg]) arg = c;
    return {-total, layers.front().classes[arg]};
  }
};

inline std::vector<std::span<const double>> layer_rows(const std::vector<Tensor>& layers, std::size_t i) {
  std::vector<std::span<const double>> out;
  for (const auto& t : layers) out.push_back(t.row(i));
  return out;
}

// ---------------------------------------------------------------------------
// Score records.
// ---------------------------------------------------------------------------

struct ScoreRecord {
  std::string id;
  std::string mode;
  std::string layer;
  double score = 0.0;
  int pred_label = -1;
  bool is_ood = false;
  int true_label = -1;  // not serialized; used for accuracy and histograms
};

inline void write_score_csv(std::ostream& out, const std::vector<ScoreRecord>& records,
                            const std::vector<std::string>& label_names) {
  out << "id,mode,layer,score,pred_label,is_ood\n";
  out << std::setprecision(17);
  for (const auto& r : records) {
    const std::string pred =
        r.pred_label >= 0 && static_cast<std::size_t>(r.pred_label) < label_names.size() ? label_names[r.pred_label] : "";
    out << r.id << ',' << r.mode << ',' << r.layer << ',' << r.score << ',' << pred << ',' << (r.is_ood ? 1 : 0)
        << "\n";
  }
}

enum class ScoreKind { Cosine, Mahalanobis };

// Every query scored against each layer's bank (features h^l, same scorer for
// all layers) plus one "z" column that reuses the single-representation path.
inline std::vector<ScoreRecord> layerwise_scores(const Embeddings& queries, const std::vector<std::string>& ids,
                                                 const std::vector<bool>& is_ood, const std::vector<int>& truth,
                                                 const EmbeddingBank& bank, ScoreKind kind,
                                                 const std::string& mode_name, double ridge = 1e-6) {
  const std::size_t n = queries.size();
  if (ids.size() != n || is_ood.size() != n || truth.size() != n) throw Error("shape-mismatch", "query metadata");
  std::vector<ScoreRecord> out;
  const std::size_t layers = bank.num_layers();
  if (queries.pooled.size() != layers) throw Error("missing-layer-bank", "layer count mismatch");
  auto emit = [&](const Tensor& q, const Tensor& b, const std::string& layer) {
    if (kind == ScoreKind::Cosine) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto nn = cosine_nearest(q.row(i), b, bank.labels);
        out.push_back({ids[i], mode_name, layer, nn.score, nn.label, is_ood[i], truth[i]});
      }
    } else {
      const auto stats = mahalanobis_fit(b, bank.labels, ridge);
      for (std::size_t i = 0; i < n; ++i) {
        const auto r = mahalanobis_nearest(q.row(i), stats);
        out.push_back({ids[i], mode_name, layer, -r.distance, r.label, is_ood[i], truth[i]});
      }
    }
  };
  for (std::size_t l = 0; l < layers; ++l) emit(queries.pooled[l], bank.emb.pooled[l], std::to_string(l + 1));
  emit(queries.z, bank.emb.z, "z");
  return out;
}

// ---------------------------------------------------------------------------
// Bank file.
// ---------------------------------------------------------------------------

inline nlohmann::json tensor_to_json(const Tensor& t) { return {{"shape", t.shape()}, {"data", t.storage()}}; }

inline Tensor tensor_from_json(const nlohmann::json& j) {
  return Tensor(j.at("shape").get<std::vector<std::size_t>>(), j.at("data").get<std::vector<double>>());
}

inline void save_bank(const EmbeddingBank& bank, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["version"] = 1;
  doc["provenance"] = {{"checkpoint_id", bank.provenance.checkpoint_id}, {"corpus_id", bank.provenance.corpus_id}};
  doc["labels"] = bank.labels;
  doc["compressed_begin"] = bank.emb.compressed_begin;
  doc["z"] = tensor_to_json(bank.emb.z);
  doc["pooled"] = nlohmann::json::array();
  for (const auto& t : bank.emb.pooled) doc["pooled"].push_back(tensor_to_json(t));
  doc["compressed"] = nlohmann::json::array();
  for (const auto& t : bank.emb.compressed) doc["compressed"].push_back(tensor_to_json(t));
  std::ofstream out(path);
  if (!out) throw Error("write-failed", path.string());
  out << doc.dump() << "\n";
}

inline EmbeddingBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("file-not-found", path.string());
  try {
    nlohmann::json doc;
    in >> doc;
    if (!doc.contains("version")) throw Error("malformed-bank", "missing version field");
    EmbeddingBank b;
    b.provenance = {doc.at("provenance").at("checkpoint_id").get<std::string>(),
                    doc.at("provenance").at("corpus_id").get<std::string>()};
    b.labels = doc.at("labels").get<std::vector<int>>();
    b.emb.compressed_begin = doc.at("compressed_begin").get<std::size_t>();
    b.emb.z = tensor_from_json(doc.at("z"));
    for (const auto& t : doc.at("pooled")) b.emb.pooled.push_back(tensor_from_json(t));
    for (const auto& t : doc.at("compressed")) b.emb.compressed.push_back(tensor_from_json(t));
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed-bank", e.what());
  }
}

}  // namespace lacl
