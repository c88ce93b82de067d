#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lacl/numcore/error.hpp"
#include "lacl/scoring/bank.hpp"
#include "lacl/scoring/threshold.hpp"

namespace lacl {

// Mann-Whitney: P(ind > ood) + ½ P(ind = ood), by exact pair counting.
inline double auroc(std::span<const double> ind, std::span<const double> ood) {
  if (ind.empty() || ood.empty()) throw Error("empty-scores", "auroc needs both populations");
  std::vector<double> sorted(ood.begin(), ood.end());
  std::sort(sorted.begin(), sorted.end());
  double wins = 0.0, ties = 0.0;
  for (double s : ind) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), s);
    const auto hi = std::upper_bound(lo, sorted.end(), s);
    wins += static_cast<double>(lo - sorted.begin());
    ties += static_cast<double>(hi - lo);
  }
  return (wins + 0.5 * ties) / (static_cast<double>(ind.size()) * static_cast<double>(ood.size()));
}

// Fraction of OOD scores that pass the threshold keeping `tpr` of IND scores.
inline double fpr_at_tpr(std::span<const double> ind, std::span<const double> ood, double tpr) {
  if (ind.empty() || ood.empty()) throw Error("empty-scores", "fpr needs both populations");
  const double delta = threshold_at_tpr(ind, tpr);
  const auto passed = std::count_if(ood.begin(), ood.end(), [&](double s) { return decide(s, delta) == Decision::Ind; });
  return static_cast<double>(passed) / static_cast<double>(ood.size());
}

inline double fpr_at_tpr95(std::span<const double> ind, std::span<const double> ood) {
  return fpr_at_tpr(ind, ood, 0.95);
}

inline double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw Error("shape-mismatch", "predictions vs labels");
  if (labels.empty()) throw Error("empty-scores", "accuracy of nothing");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// Histogram of score populations.
// ---------------------------------------------------------------------------

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> ind_right;
  std::vector<std::size_t> ind_wrong;
  std::vector<std::size_t> ood;
  double threshold = 0.0;  // δ at 95% TPR over the IND scores

  std::size_t bins() const { return ood.size(); }
  double edge(std::size_t b) const { return lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins()); }
};

// Uniform bins over [min, max] of all scores; the maximum falls in the last
// bin. A single distinct value puts everything in bin 0.
inline Histogram histogram_payload(const std::vector<ScoreRecord>& records, std::size_t bins,
                                   std::optional<double> threshold = std::nullopt) {
  if (bins < 2) throw Error("invalid-bins", "need at least 2 bins");
  Histogram h;
  h.ind_right.assign(bins, 0);
  h.ind_wrong.assign(bins, 0);
  h.ood.assign(bins, 0);
  if (records.empty()) return h;
  h.lo = h.hi = records.front().score;
  std::vector<double> ind;
  for (const auto& r : records) {
    h.lo = std::min(h.lo, r.score);
    h.hi = std::max(h.hi, r.score);
    if (!r.is_ood) ind.push_back(r.score);
  }
  for (const auto& r : records) {
    std::size_t b = 0;
    if (h.hi > h.lo) {
      const double t = (r.score - h.lo) / (h.hi - h.lo);
      b = std::min(bins - 1, static_cast<std::size_t>(std::floor(t * static_cast<double>(bins))));
    }
    if (r.is_ood) ++h.ood[b];
    else if (r.pred_label == r.true_label) ++h.ind_right[b];
    else ++h.ind_wrong[b];
  }
  if (threshold) h.threshold = *threshold;
  else if (!ind.empty()) h.threshold = threshold_at_tpr(ind, 0.95);
  return h;
}

inline void write_histogram_header(std::ostream& out) {
  out << "scorer,bin,lower,upper,ind_right,ind_wrong,ood,threshold\n";
}

inline void write_histogram_rows(std::ostream& out, const std::string& scorer, const Histogram& h) {
  out << std::setprecision(17);
  for (std::size_t b = 0; b < h.bins(); ++b)
    out << scorer << ',' << b << ',' << h.edge(b) << ',' << h.edge(b + 1) << ',' << h.ind_right[b] << ','
        << h.ind_wrong[b] << ',' << h.ood[b] << ',' << h.threshold << "\n";
}

// ---------------------------------------------------------------------------
// Report.
// ---------------------------------------------------------------------------

struct ScorerMetrics {
  std::string name;
  bool ok = false;
  std::string error;
  double accuracy = 0.0;
  double auroc = 0.0;
  double fpr_at_95 = 0.0;
  double threshold = 0.0;
};

// Summary of one scorer from its IND-test and OOD records. When `delta` is
// given it replaces the threshold derived from IND-test scores.
inline ScorerMetrics summarize(const std::string& name, const std::vector<ScoreRecord>& records,
                               std::optional<double> delta = std::nullopt) {
  std::vector<double> ind, ood;
  std::vector<int> pred, truth;
  for (const auto& r : records) {
    if (r.is_ood) {
      ood.push_back(r.score);
    } else {
      ind.push_back(r.score);
      pred.push_back(r.pred_label);
      truth.push_back(r.true_label);
    }
  }
  ScorerMetrics m;
  m.name = name;
  m.ok = true;
  m.accuracy = accuracy(pred, truth);
  m.auroc = auroc(ind, ood);
  m.threshold = delta ? *delta : threshold_at_tpr(ind, 0.95);
  const auto passed = std::count_if(ood.begin(), ood.end(), [&](double s) { return decide(s, m.threshold) == Decision::Ind; });
  m.fpr_at_95 = static_cast<double>(passed) / static_cast<double>(ood.size());
  return m;
}

struct MetricsReport {
  nlohmann::json context;  // checkpoint id, variant, threshold source, ...
  std::vector<ScorerMetrics> scorers;
  std::map<std::string, double> layerwise_auroc;  // layer name -> AUROC
  std::string layerwise_kind;

  // Deterministic: keys sorted, no timings.
  nlohmann::json to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["context"] = context;
    const ScorerMetrics* first = nullptr;
    for (const auto& s : scorers)
      if (s.ok && !first) first = &s;
    j["accuracy"] = first ? nlohmann::json(first->accuracy) : nlohmann::json(nullptr);
    nlohmann::json blocks = nlohmann::json::object();
    for (const auto& s : scorers) {
      if (s.ok)
        blocks[s.name] = {{"status", "ok"},
                          {"accuracy", s.accuracy},
                          {"auroc", s.auroc},
                          {"fpr_at_95", s.fpr_at_95},
                          {"threshold", s.threshold}};
      else
        blocks[s.name] = {{"status", "failed"}, {"error", s.error}};
    }
    j["scorers"] = blocks;
    j["layerwise"] = {{"kind", layerwise_kind}, {"auroc", layerwise_auroc}};
    return j;
  }
};

// AUROC per layer column of a layer-wise table.
inline std::map<std::string, double> layerwise_auroc(const std::vector<ScoreRecord>& records) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_layer;
  for (const auto& r : records) (r.is_ood ? by_layer[r.layer].second : by_layer[r.layer].first).push_back(r.score);
  std::map<std::string, double> out;
  for (const auto& [layer, pops] : by_layer) out[layer] = auroc(pops.first, pops.second);
  return out;
}

}  // namespace lacl
