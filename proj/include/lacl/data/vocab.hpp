#pragma once

#include <cctype>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lacl/data/corpus.hpp"
#include "lacl/numcore/error.hpp"

namespace lacl {

// Lowercase, then split on whitespace.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(u < 128 ? static_cast<char>(std::tolower(u)) : ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kMask = 2;

  Vocabulary() { reset({}); }

  // Words are ordered lexicographically after the three reserved ids, so the
  // assignment depends only on the set of retained words.
  static Vocabulary build(const std::vector<LabeledExample>& examples, std::size_t min_freq = 1) {
    if (min_freq < 1) throw Error("invalid-min-freq", "min_freq must be at least 1");
    std::map<std::string, std::size_t> counts;
    for (const auto& e : examples)
      for (auto& tok : tokenize(e.text)) ++counts[tok];
    std::vector<std::string> words;
    for (const auto& [w, n] : counts)
      if (n >= min_freq && !is_reserved(w)) words.push_back(w);
    Vocabulary v;
    v.reset(std::move(words));
    return v;
  }

  // Rebuilds from the full id-ordered token list (as stored in checkpoints).
  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < 3 || tokens[0] != "<pad>" || tokens[1] != "<unk>" || tokens[2] != "<mask>")
      throw Error("malformed-vocabulary", "reserved tokens missing");
    Vocabulary v;
    v.reset(std::vector<std::string>(tokens.begin() + 3, tokens.end()));
    return v;
  }

  int id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }

  std::vector<int> encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& tok : tokenize(text)) ids.push_back(is_reserved(tok) ? kUnk : id(tok));
    return ids;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  static bool is_reserved(const std::string& w) { return w == "<pad>" || w == "<unk>" || w == "<mask>"; }

  void reset(std::vector<std::string> words) {
    tokens_ = {"<pad>", "<unk>", "<mask>"};
    tokens_.insert(tokens_.end(), words.begin(), words.end());
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Fills `tokens` for every example; an utterance with no tokens is an error.
inline void encode_examples(std::vector<LabeledExample>& examples, const Vocabulary& vocab) {
  for (std::size_t i = 0; i < examples.size(); ++i) {
    examples[i].tokens = vocab.encode(examples[i].text);
    if (examples[i].tokens.empty()) throw Error("empty-text", "example " + std::to_string(i));
  }
}

inline void encode_corpus(Corpus& corpus, const Vocabulary& vocab) {
  encode_examples(corpus.train, vocab);
  encode_examples(corpus.val, vocab);
  encode_examples(corpus.test, vocab);
  for (auto& [k, v] : corpus.oos) encode_examples(v, vocab);
}

}  // namespace lacl
