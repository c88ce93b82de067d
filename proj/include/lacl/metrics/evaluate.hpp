#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lacl/data/corpus.hpp"
#include "lacl/metrics/metrics.hpp"
#include "lacl/scoring/bank.hpp"
#include "lacl/scoring/cosine.hpp"
#include "lacl/scoring/mahalanobis.hpp"
#include "lacl/trainer/model.hpp"

namespace lacl {

enum class ThresholdSource { Test, Train };

inline const std::vector<std::string>& all_scorers() {
  static const std::vector<std::string> names = {"cosine-single", "cosine-ens", "maha-single", "maha-ens"};
  return names;
}

struct EvalOptions {
  std::vector<std::string> scorers = all_scorers();
  SliceMode slice = SliceMode::Full;
  LayerFeature ensemble_feature = LayerFeature::Pooled;
  ThresholdSource threshold_source = ThresholdSource::Test;
  ScoreKind layerwise_kind = ScoreKind::Cosine;
  std::size_t histogram_bins = 20;
  double ridge = 1e-6;
};

struct EvalOutputs {
  MetricsReport report;
  std::vector<ScoreRecord> scores;     // every successful scorer, IND test then OOD
  std::vector<ScoreRecord> layerwise;  // layers 1..L and z
  std::vector<std::pair<std::string, Histogram>> histograms;
  EmbeddingBank bank;
};

namespace detail {

struct Scored {
  double score;
  int label;
};

using Scorer = std::function<std::vector<Scored>(const Embeddings&)>;

inline std::vector<Tensor> select_layers(const std::vector<Tensor>& layers, std::size_t begin) {
  return std::vector<Tensor>(layers.begin() + static_cast<std::ptrdiff_t>(std::min(begin, layers.size())),
                             layers.end());
}

// Layers used by the ensemble scorers. The upper-half slice drops the lower
// layers for the cosine ensemble.
inline std::vector<Tensor> ensemble_layers(const Embeddings& e, LayerFeature f, SliceMode slice, bool cosine) {
  const auto& all = layer_features(e, f);
  if (!cosine || slice == SliceMode::Full) return all;
  const std::size_t begin = upper_half_begin(e.pooled.size());
  const std::size_t offset = f == LayerFeature::Pooled ? 0 : e.compressed_begin;
  return select_layers(all, begin > offset ? begin - offset : 0);
}

// Fits whatever the scorer needs on the bank and returns the query function.
inline Scorer make_scorer(const std::string& name, const Model& model, const EmbeddingBank& bank,
                          const EvalOptions& opt) {
  if (name == "cosine-single") {
    if (opt.slice == SliceMode::UpperHalf) z_segment(bank.emb, opt.slice);  // fail early for CE checkpoints
    return [&bank, &opt](const Embeddings& q) {
      std::vector<Scored> out;
      for (const auto& nn : cosine_scores(q, bank, opt.slice)) out.push_back({nn.score, nn.label});
      return out;
    };
  }
  if (name == "cosine-ens") {
    auto bank_layers = ensemble_layers(bank.emb, opt.ensemble_feature, opt.slice, true);
    return [&bank, &opt, bank_layers](const Embeddings& q) {
      const auto ql = ensemble_layers(q, opt.ensemble_feature, opt.slice, true);
      std::vector<Scored> out;
      for (std::size_t i = 0; i < q.size(); ++i) {
        const auto r = cosine_ensemble_score(layer_rows(ql, i), bank_layers, bank.labels);
        out.push_back({r.score, r.label});
      }
      return out;
    };
  }
  if (name == "maha-single") {
    // LaCL scores the normalized z; the baseline scores its last-layer h^L.
    const bool lacl = model.is_lacl();
    const Tensor& feats = lacl ? bank.emb.z : bank.emb.pooled.back();
    auto stats = mahalanobis_fit(feats, bank.labels, opt.ridge);
    return [lacl, stats](const Embeddings& q) {
      const Tensor& x = lacl ? q.z : q.pooled.back();
      std::vector<Scored> out;
      for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto r = mahalanobis_nearest(x.row(i), stats);
        out.push_back({-r.distance, r.label});
      }
      return out;
    };
  }
  if (name == "maha-ens") {
    auto ens = MahalanobisEnsemble::fit(layer_features(bank.emb, opt.ensemble_feature), bank.labels, opt.ridge);
    return [&opt, ens](const Embeddings& q) {
      const auto& ql = layer_features(q, opt.ensemble_feature);
      std::vector<Scored> out;
      for (std::size_t i = 0; i < q.size(); ++i) {
        const auto r = ens.score(layer_rows(ql, i));
        out.push_back({r.score, r.label});
      }
      return out;
    };
  }
  throw Error("unknown-scorer", name);
}

}  // namespace detail

inline std::string to_string(SliceMode s) { return s == SliceMode::Full ? "full" : "upper-half"; }
inline std::string to_string(ThresholdSource s) { return s == ThresholdSource::Test ? "test" : "train"; }

// Scores IND test and OOD test examples with every requested scorer. A scorer
// that fails (for example a singular covariance) is reported as failed and
// the others still run.
inline EvalOutputs evaluate(const Model& model, const std::vector<LabeledExample>& train,
                            const std::vector<LabeledExample>& ind_test, const std::vector<LabeledExample>& ood_test,
                            const EvalOptions& opt, Provenance provenance = {}) {
  if (ind_test.empty() || ood_test.empty()) throw Error("empty-split", "evaluation needs IND and OOD test data");
  EvalOutputs out;
  out.bank = build_bank(model, train, std::move(provenance));
  const EmbeddingBank& bank = out.bank;
  std::vector<LabeledExample> queries = ind_test;
  queries.insert(queries.end(), ood_test.begin(), ood_test.end());
  const Embeddings q = embed(model, queries);
  std::vector<std::string> ids;
  std::vector<bool> is_ood;
  std::vector<int> truth;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const bool ood = i >= ind_test.size();
    ids.push_back(ood ? "ood-" + std::to_string(i - ind_test.size()) : "ind-" + std::to_string(i));
    is_ood.push_back(ood);
    truth.push_back(ood ? -1 : queries[i].label);
  }

  out.report.context = {{"checkpoint_id", bank.provenance.checkpoint_id},
                        {"corpus_id", bank.provenance.corpus_id},
                        {"mode", to_string(model.options.mode)},
                        {"train_variant", to_string(model.options.variant)},
                        {"slice", to_string(opt.slice)},
                        {"ensemble_feature", opt.ensemble_feature == LayerFeature::Pooled ? "pooled" : "compressed"},
                        {"threshold_source", to_string(opt.threshold_source)},
                        {"bank_size", bank.size()},
                        {"ind_test", ind_test.size()},
                        {"ood_test", ood_test.size()}};
  for (const auto& name : opt.scorers) {
    ScorerMetrics m;
    m.name = name;
    try {
      auto scorer = detail::make_scorer(name, model, bank, opt);
      const auto scored = scorer(q);
      std::vector<ScoreRecord> recs;
      for (std::size_t i = 0; i < scored.size(); ++i) {
        if (!std::isfinite(scored[i].score)) throw Error("non-finite-score", ids[i]);
        recs.push_back({ids[i], name, "z", scored[i].score, scored[i].label, is_ood[i], truth[i]});
      }
      std::optional<double> delta;
      if (opt.threshold_source == ThresholdSource::Train) {
        std::vector<double> train_scores;
        for (const auto& s : scorer(bank.emb)) train_scores.push_back(s.score);
        delta = threshold_at_tpr(train_scores, 0.95);
      }
      m = summarize(name, recs, delta);
      out.histograms.emplace_back(name, histogram_payload(recs, opt.histogram_bins, m.threshold));
      out.scores.insert(out.scores.end(), recs.begin(), recs.end());
    } catch (const std::exception& e) {
      m.ok = false;
      m.error = e.what();
    }
    out.report.scorers.push_back(m);
  }
  out.layerwise = layerwise_scores(q, ids, is_ood, truth, bank, opt.layerwise_kind,
                                   opt.layerwise_kind == ScoreKind::Cosine ? "cosine-layerwise" : "maha-layerwise",
                                   opt.ridge);
  out.report.layerwise_kind = opt.layerwise_kind == ScoreKind::Cosine ? "cosine" : "mahalanobis";
  out.report.layerwise_auroc = layerwise_auroc(out.layerwise);
  return out;
}

}  // namespace lacl
