#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lacl/numcore/error.hpp"

namespace lacl {

struct LabeledExample {
  std::string text;
  std::vector<int> tokens;
  int label = -1;  // -1 for label-free OOD examples
  std::optional<std::string> domain;
};

// An intent corpus in the CLINC150 layout: train/val/test splits of labeled
// utterances plus optional label-free "oos_*" splits. Label ids index the
// sorted label_names.
struct Corpus {
  std::vector<std::string> label_names;
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> val;
  std::vector<LabeledExample> test;
  std::map<std::string, std::vector<LabeledExample>> oos;

  std::size_t num_labels() const { return label_names.size(); }

  int label_id(const std::string& name) const {
    auto it = std::lower_bound(label_names.begin(), label_names.end(), name);
    if (it == label_names.end() || *it != name) return -1;
    return static_cast<int>(it - label_names.begin());
  }

  // Domain of each label, when records carry one.
  std::map<std::string, std::string> label_domains() const {
    std::map<std::string, std::string> out;
    for (const auto* split : {&train, &val, &test})
      for (const auto& ex : *split)
        if (ex.domain && ex.label >= 0) out.emplace(label_names[ex.label], *ex.domain);
    return out;
  }
};

namespace detail {

inline bool is_oos_split(const std::string& key) { return key.rfind("oos_", 0) == 0; }

inline bool is_labeled_split(const std::string& key) {
  return key == "train" || key == "val" || key == "test";
}

}  // namespace detail

// Outlier-only files (just oos_* splits) load with require_train = false.
inline Corpus parse_corpus(const nlohmann::json& doc, bool require_train = true) {
  if (!doc.is_object()) throw Error("malformed-corpus", "top level must be an object of splits");
  struct Raw {
    std::string text, label;
    std::optional<std::string> domain;
  };
  std::map<std::string, std::vector<Raw>> raw;
  std::set<std::string> labels;
  for (const auto& [key, records] : doc.items()) {
    if (!detail::is_labeled_split(key) && !detail::is_oos_split(key))
      throw Error("unknown-split", key);
    if (!records.is_array()) throw Error("malformed-record", "split " + key + " is not an array");
    auto& out = raw[key];
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      const bool ok = r.is_array() && (r.size() == 2 || r.size() == 3) && r[0].is_string() &&
                      r[1].is_string() && (r.size() == 2 || r[2].is_string());
      if (!ok) throw Error("malformed-record", "split " + key + ", index " + std::to_string(i));
      Raw item{r[0].get<std::string>(), r[1].get<std::string>(), std::nullopt};
      if (r.size() == 3) item.domain = r[2].get<std::string>();
      if (!detail::is_oos_split(key)) labels.insert(item.label);
      out.push_back(std::move(item));
    }
  }
  Corpus c;
  c.label_names.assign(labels.begin(), labels.end());
  for (auto& [key, items] : raw) {
    std::vector<LabeledExample> exs;
    exs.reserve(items.size());
    const bool oos = detail::is_oos_split(key);
    for (auto& it : items)
      exs.push_back({std::move(it.text), {}, oos ? -1 : c.label_id(it.label), std::move(it.domain)});
    if (key == "train") c.train = std::move(exs);
    else if (key == "val") c.val = std::move(exs);
    else if (key == "test") c.test = std::move(exs);
    else c.oos[key] = std::move(exs);
  }
  if (require_train && c.train.empty()) throw Error("empty-split", "train");
  return c;
}

inline Corpus load_corpus(const std::filesystem::path& path, bool require_train = true) {
  std::ifstream in(path);
  if (!in) throw Error("file-not-found", path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed-corpus", path.string() + ": " + e.what());
  }
  return parse_corpus(doc, require_train);
}

inline nlohmann::json corpus_to_json(const Corpus& c) {
  auto encode = [&](const std::vector<LabeledExample>& exs, bool oos) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : exs) {
      nlohmann::json rec = {e.text, oos ? std::string("oos") : c.label_names.at(e.label)};
      if (e.domain) rec.push_back(*e.domain);
      arr.push_back(std::move(rec));
    }
    return arr;
  };
  nlohmann::json doc = nlohmann::json::object();
  if (!c.train.empty() || c.oos.empty()) doc["train"] = encode(c.train, false);
  if (!c.val.empty()) doc["val"] = encode(c.val, false);
  if (!c.test.empty()) doc["test"] = encode(c.test, false);
  for (const auto& [k, v] : c.oos) doc[k] = encode(v, true);
  return doc;
}

inline void save_corpus(const Corpus& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("write-failed", path.string());
  out << corpus_to_json(c).dump(1) << "\n";
}

// Examples used as OOD test data when this corpus is paired as the outlier
// source: its oos_test split if present (any oos split otherwise), else test.
inline std::vector<LabeledExample> ood_examples(const Corpus& c) {
  std::vector<LabeledExample> out;
  if (auto it = c.oos.find("oos_test"); it != c.oos.end()) {
    out = it->second;
  } else if (!c.oos.empty()) {
    for (const auto& [k, v] : c.oos) out.insert(out.end(), v.begin(), v.end());
  } else {
    out = c.test;
  }
  for (auto& e : out) e.label = -1;
  return out;
}

}  // namespace lacl
