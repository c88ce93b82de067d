#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lacl/data/corpus.hpp"
#include "lacl/numcore/error.hpp"
#include "lacl/numcore/random.hpp"

namespace lacl {

// Restricts a corpus to `keep` label names (re-indexed in sorted order).
// Label-free oos splits are dropped.
inline Corpus restrict_labels(const Corpus& c, const std::set<std::string>& keep) {
  Corpus out;
  out.label_names.assign(keep.begin(), keep.end());
  auto filter = [&](const std::vector<LabeledExample>& in) {
    std::vector<LabeledExample> res;
    for (const auto& e : in) {
      const std::string& name = c.label_names.at(e.label);
      if (!keep.count(name)) continue;
      LabeledExample copy = e;
      copy.label = out.label_id(name);
      res.push_back(std::move(copy));
    }
    return res;
  };
  out.train = filter(c.train);
  out.val = filter(c.val);
  out.test = filter(c.test);
  return out;
}

// Number of IND labels kept for a close split: ceil(ratio * K).
inline std::size_t ind_label_count(double ratio, std::size_t labels) {
  return static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(labels) - 1e-9));
}

struct CloseSplit {
  Corpus ind;
  Corpus ood;
};

// Partitions the label set with a seeded Fisher-Yates shuffle; the first
// ceil(ratio * K) shuffled labels become in-distribution.
inline CloseSplit close_split(const Corpus& c, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error("invalid-ratio", "ratio must lie in (0, 1)");
  const std::size_t k = c.num_labels();
  const std::size_t k_ind = ind_label_count(ratio, k);
  if (k_ind == 0 || k_ind >= k)
    throw Error("degenerate-split", std::to_string(k_ind) + " of " + std::to_string(k) + " labels IND");
  std::vector<std::string> order = c.label_names;
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  std::set<std::string> ind(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_ind));
  std::set<std::string> ood(order.begin() + static_cast<std::ptrdiff_t>(k_ind), order.end());
  return {restrict_labels(c, ind), restrict_labels(c, ood)};
}

// One class or domain name per line; '#' starts a comment.
inline std::vector<std::string> parse_exclusions(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

inline std::vector<std::string> load_exclusions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("file-not-found", path.string());
  return parse_exclusions(in);
}

struct FarPairing {
  Corpus ind;
  std::vector<LabeledExample> ood_test;
};

// Removes every excluded intent (or every intent of an excluded domain) from
// the IND corpus, and takes the OOD corpus as test-only outlier data.
inline FarPairing far_pair(const Corpus& ind, const Corpus& ood, const std::vector<std::string>& exclusions) {
  const auto domains = ind.label_domains();
  std::set<std::string> drop;
  std::vector<std::string> unknown;
  for (const auto& name : exclusions) {
    bool matched = false;
    if (ind.label_id(name) >= 0) {
      drop.insert(name);
      matched = true;
    }
    for (const auto& [label, dom] : domains)
      if (dom == name) {
        drop.insert(label);
        matched = true;
      }
    if (!matched) unknown.push_back(name);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw Error("unknown-exclusion", list);
  }
  std::set<std::string> keep;
  for (const auto& l : ind.label_names)
    if (!drop.count(l)) keep.insert(l);
  if (keep.empty()) throw Error("degenerate-split", "every IND class excluded");
  FarPairing p{restrict_labels(ind, keep), ood_examples(ood)};
  p.ind.oos = {};
  return p;
}

}  // namespace lacl
