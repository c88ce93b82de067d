#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lacl/data/corpus.hpp"
#include "lacl/data/vocab.hpp"
#include "lacl/numcore/error.hpp"
#include "lacl/numcore/random.hpp"

namespace lacl {

// ---------------------------------------------------------------------------
// Token-level augmentations. All are pure functions of (input, params, seed)
// and always leave at least one original token in place.
// ---------------------------------------------------------------------------

// Masks non-overlapping spans of `span` tokens until ceil(rate * len) tokens
// are covered, capped at len - 1 so one real token survives. Spans are placed
// where they fit whole; a fragmented remainder falls back to shorter spans.
inline std::vector<int> random_span_mask(std::vector<int> tokens, double rate, std::size_t span,
                                         std::uint64_t seed) {
  if (tokens.empty()) throw Error("empty-sequence");
  if (span < 1) throw Error("invalid-span", "span must be at least 1");
  const std::size_t n = tokens.size();
  const auto wanted = static_cast<std::size_t>(std::ceil(std::clamp(rate, 0.0, 1.0) * n - 1e-9));
  const std::size_t target = std::min(wanted, n - 1);
  std::vector<bool> masked(n, false);
  std::size_t covered = 0;
  Rng rng(seed);
  while (covered < target) {
    std::size_t k = std::min(span, target - covered);
    std::vector<std::size_t> starts;
    while (starts.empty() && k > 0) {
      for (std::size_t s = 0; s + k <= n; ++s) {
        bool free = true;
        for (std::size_t j = s; j < s + k && free; ++j) free = !masked[j];
        if (free) starts.push_back(s);
      }
      if (starts.empty()) --k;
    }
    if (starts.empty()) break;
    const std::size_t s = starts[rng.index(starts.size())];
    for (std::size_t j = s; j < s + k; ++j) masked[j] = true;
    covered += k;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (masked[i]) tokens[i] = Vocabulary::kMask;
  return tokens;
}

// Deletes floor(rate * len) seeded positions (at most len - 1); survivors keep
// their relative order.
inline std::vector<int> token_cutoff(const std::vector<int>& tokens, double rate, std::uint64_t seed) {
  if (tokens.empty()) throw Error("empty-sequence");
  const std::size_t n = tokens.size();
  const auto drop = std::min(static_cast<std::size_t>(std::floor(std::clamp(rate, 0.0, 1.0) * n + 1e-9)), n - 1);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  std::vector<bool> removed(n, false);
  for (std::size_t i = 0; i < drop; ++i) removed[order[i]] = true;
  std::vector<int> out;
  for (std::size_t i = 0; i < n; ++i)
    if (!removed[i]) out.push_back(tokens[i]);
  return out;
}

inline std::vector<int> token_shuffle(std::vector<int> tokens, std::uint64_t seed) {
  if (tokens.empty()) throw Error("empty-sequence");
  Rng rng(seed);
  rng.shuffle(tokens.begin(), tokens.end());
  return tokens;
}

// ---------------------------------------------------------------------------
// Back-translation through a precomputed paraphrase sidecar.
// ---------------------------------------------------------------------------

class ParaphraseSidecar {
 public:
  ParaphraseSidecar() = default;

  explicit ParaphraseSidecar(const std::map<std::string, std::vector<std::string>>& entries) {
    for (const auto& [k, v] : entries) add(k, v);
  }

  static ParaphraseSidecar load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("file-not-found", path.string());
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw Error("malformed-sidecar", e.what());
    }
    if (!doc.is_object()) throw Error("malformed-sidecar", "expected an object of text -> [paraphrases]");
    ParaphraseSidecar s;
    for (const auto& [k, v] : doc.items()) {
      if (!v.is_array()) throw Error("malformed-sidecar", "entry for '" + k + "' is not an array");
      std::vector<std::string> alts;
      for (const auto& a : v) {
        if (!a.is_string()) throw Error("malformed-sidecar", "non-string paraphrase for '" + k + "'");
        alts.push_back(a.get<std::string>());
      }
      s.add(k, alts);
    }
    return s;
  }

  // Paraphrases differing from the source text (case and spacing ignored).
  std::vector<std::string> candidates(const std::string& text) const {
    auto it = entries_.find(key(text));
    if (it == entries_.end()) return {};
    std::vector<std::string> out;
    for (const auto& alt : it->second)
      if (key(alt) != key(text) && std::find(out.begin(), out.end(), alt) == out.end()) out.push_back(alt);
    return out;
  }

  std::size_t size() const noexcept { return entries_.size(); }

 private:
  static std::string key(const std::string& text) {
    std::string out;
    for (const auto& tok : tokenize(text)) out += (out.empty() ? "" : " ") + tok;
    return out;
  }

  void add(const std::string& text, const std::vector<std::string>& alts) {
    auto& dst = entries_[key(text)];
    dst.insert(dst.end(), alts.begin(), alts.end());
  }

  std::map<std::string, std::vector<std::string>> entries_;
};

// Seeded pick among the non-identical paraphrases; the original text when the
// sidecar is absent or has nothing usable.
inline std::string back_translate(const std::string& text, const ParaphraseSidecar* sidecar, std::uint64_t seed) {
  if (!sidecar) return text;
  const auto alts = sidecar->candidates(text);
  if (alts.empty()) return text;
  Rng rng(seed);
  return alts[rng.index(alts.size())];
}

// ---------------------------------------------------------------------------
// View construction.
// ---------------------------------------------------------------------------

enum class Augmentation { Raw, BackTranslate, SpanMask, Shuffle, Cutoff };

inline Augmentation parse_augmentation(const std::string& name) {
  if (name == "raw") return Augmentation::Raw;
  if (name == "bt") return Augmentation::BackTranslate;
  if (name == "rsm") return Augmentation::SpanMask;
  if (name == "shuffle") return Augmentation::Shuffle;
  if (name == "cutoff") return Augmentation::Cutoff;
  throw Error("unknown-augmentation", name);
}

struct AugmentPolicy {
  double rsm_rate = 0.15;
  std::size_t rsm_span = 2;
  double cutoff_rate = 0.0;
  std::optional<std::filesystem::path> bt_sidecar_path;
  // Dropout is not listed: it is applied by the encoder's stochastic forward.
  std::vector<Augmentation> view1 = {Augmentation::Raw, Augmentation::SpanMask};
  std::vector<Augmentation> view2 = {Augmentation::BackTranslate, Augmentation::SpanMask};

  void validate() const {
    if (rsm_rate < 0.0 || rsm_rate > 1.0 || cutoff_rate < 0.0 || cutoff_rate > 1.0)
      throw Error("invalid-policy", "rates must lie in [0, 1]");
    if (rsm_span < 1) throw Error("invalid-policy", "rsm_span must be at least 1");
  }
};

inline std::vector<Augmentation> parse_recipe(const std::string& csv) {
  std::vector<Augmentation> out;
  std::string cur;
  for (char ch : csv + "+") {
    if (ch == '+' || ch == ',') {
      if (!cur.empty()) out.push_back(parse_augmentation(cur));
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      cur.push_back(ch);
    }
  }
  return out;
}

struct ViewPair {
  std::vector<int> first;
  std::vector<int> second;
  int label = -1;
};

inline std::vector<int> apply_recipe(const LabeledExample& ex, const std::vector<Augmentation>& recipe,
                                     const AugmentPolicy& policy, const Vocabulary& vocab,
                                     const ParaphraseSidecar* sidecar, std::uint64_t seed) {
  std::vector<int> tokens = ex.tokens.empty() ? vocab.encode(ex.text) : ex.tokens;
  for (std::size_t step = 0; step < recipe.size(); ++step) {
    const std::uint64_t s = derive_seed({seed, step});
    switch (recipe[step]) {
      case Augmentation::Raw:
        break;
      case Augmentation::BackTranslate: {
        const std::string text = back_translate(ex.text, sidecar, s);
        if (text != ex.text) {
          auto encoded = vocab.encode(text);
          if (!encoded.empty()) tokens = std::move(encoded);
        }
        break;
      }
      case Augmentation::SpanMask:
        tokens = random_span_mask(std::move(tokens), policy.rsm_rate, policy.rsm_span, s);
        break;
      case Augmentation::Shuffle:
        tokens = token_shuffle(std::move(tokens), s);
        break;
      case Augmentation::Cutoff:
        tokens = token_cutoff(tokens, policy.cutoff_rate, s);
        break;
    }
  }
  if (tokens.empty()) throw Error("empty-sequence", "augmentation produced no tokens");
  return tokens;
}

// The two views t1(x), t2(x) of one example, each with an independent seed.
// Labels are carried over unchanged.
inline ViewPair make_views(const LabeledExample& ex, const AugmentPolicy& policy, const Vocabulary& vocab,
                           const ParaphraseSidecar* sidecar, std::uint64_t seed) {
  policy.validate();
  return {apply_recipe(ex, policy.view1, policy, vocab, sidecar, derive_seed({seed, 1})),
          apply_recipe(ex, policy.view2, policy, vocab, sidecar, derive_seed({seed, 2})), ex.label};
}

}  // namespace lacl
