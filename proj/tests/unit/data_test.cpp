#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "lacl/data/batch.hpp"
#include "lacl/data/corpus.hpp"
#include "lacl/data/split.hpp"
#include "lacl/data/synthetic.hpp"
#include "lacl/data/vocab.hpp"
#include "lacl/trainer/trainer.hpp"
#include "support/errors.hpp"
#include "support/oracles.hpp"

using namespace lacl;
using nlohmann::json;

namespace {

// K labels with `per_label` train and test examples each.
Corpus labelled_corpus(std::size_t k, std::size_t per_label = 2) {
  json doc = {{"train", json::array()}, {"test", json::array()}};
  for (std::size_t l = 0; l < k; ++l)
    for (std::size_t i = 0; i < per_label; ++i) {
      const std::string label = "intent_" + std::to_string(l);
      doc["train"].push_back(json::array({"example " + std::to_string(i) + " of " + label, label}));
      doc["test"].push_back(json::array({"query " + std::to_string(i) + " of " + label, label}));
    }
  return parse_corpus(doc);
}

std::set<std::string> names(const Corpus& c) { return {c.label_names.begin(), c.label_names.end()}; }

}  // namespace

TEST(LoadCorpus, OosSplitIsFlaggedOodOnly) {
  const json doc = json::parse(R"({"train": [["what is my balance", "balance"], ["move money", "transfer"]],
                                   "oos_test": [["tell me a joke", "oos"]]})");
  const Corpus c = parse_corpus(doc);
  EXPECT_EQ(c.label_names, (std::vector<std::string>{"balance", "transfer"}));
  ASSERT_EQ(c.oos.count("oos_test"), 1u);
  EXPECT_EQ(c.oos.at("oos_test").front().label, -1);
  const auto ood = ood_examples(c);
  ASSERT_EQ(ood.size(), 1u);
  EXPECT_EQ(ood.front().text, "tell me a joke");
}

TEST(LoadCorpus, EmptyTrainSplitIsAnError) {
  EXPECT_EQ(error_code_of([] { parse_corpus(json{{"train", json::array()}}); }), "empty-split");
  EXPECT_EQ(error_code_of([] { parse_corpus(json::parse(R"({"test": [["a", "b"]]})")); }), "empty-split");
}

TEST(LoadCorpus, MalformedInputsAreReported) {
  EXPECT_EQ(error_code_of([] { parse_corpus(json::parse(R"({"training": [["a", "b"]]})")); }), "unknown-split");
  EXPECT_EQ(error_code_of([] { parse_corpus(json::parse(R"({"train": [["a"]]})")); }), "malformed-record");
  EXPECT_EQ(error_code_of([] { parse_corpus(json::parse(R"({"train": {"a": "b"}})")); }), "malformed-record");
  EXPECT_EQ(error_code_of([] { load_corpus("/nonexistent/corpus.json"); }), "file-not-found");
}

TEST(LoadCorpus, BundledSyntheticCorpusHasEightLabels) {
  const Corpus c = load_corpus(std::filesystem::path(LACL_DATA_DIR) / "intents8.json");
  ASSERT_EQ(c.num_labels(), 8u);
  const synthetic::Counts counts;
  std::map<int, std::size_t> train, test;
  for (const auto& e : c.train) ++train[e.label];
  for (const auto& e : c.test) ++test[e.label];
  for (int l = 0; l < 8; ++l) {
    EXPECT_EQ(train[l], counts.train);
    EXPECT_EQ(test[l], counts.test);
  }
  EXPECT_EQ(c.val.size(), 8 * counts.val);
  EXPECT_GT(c.oos.at("oos_test").size(), 0u);
}

TEST(LoadCorpus, SaveThenLoadRoundTrips) {
  const auto g = synthetic::generate(synthetic::default_intents(), {5, 1, 2, 3}, 4);
  const auto path = std::filesystem::temp_directory_path() / "lacl_roundtrip_corpus.json";
  save_corpus(g.corpus, path);
  const Corpus back = load_corpus(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.label_names, g.corpus.label_names);
  ASSERT_EQ(back.train.size(), g.corpus.train.size());
  for (std::size_t i = 0; i < back.train.size(); ++i) {
    EXPECT_EQ(back.train[i].text, g.corpus.train[i].text);
    EXPECT_EQ(back.train[i].label, g.corpus.train[i].label);
    EXPECT_EQ(back.train[i].domain, g.corpus.train[i].domain);
  }
  EXPECT_EQ(back.oos.at("oos_test").size(), 3u);
}

TEST(Vocabulary, EncodesKnownAndUnknownWords) {
  std::vector<LabeledExample> exs = {{"Read text", {}, 0, {}}, {"read the text", {}, 0, {}}};
  const auto v = Vocabulary::build(exs, 2);
  EXPECT_EQ(v.encode("Read text"), (std::vector<int>{v.id("read"), v.id("text")}));
  EXPECT_NE(v.id("read"), Vocabulary::kUnk);
  EXPECT_EQ(v.encode("zebra"), (std::vector<int>{Vocabulary::kUnk}));
  EXPECT_EQ(v.encode("the"), (std::vector<int>{Vocabulary::kUnk}));  // below min_freq
  EXPECT_EQ(Vocabulary::kUnk, 1);
}

TEST(Vocabulary, SameCorpusGivesSameIds) {
  const Corpus a = load_corpus(std::filesystem::path(LACL_DATA_DIR) / "intents8.json");
  const Corpus b = load_corpus(std::filesystem::path(LACL_DATA_DIR) / "intents8.json");
  EXPECT_EQ(Vocabulary::build(a.train).tokens(), Vocabulary::build(b.train).tokens());
  const auto v = Vocabulary::build(a.train);
  EXPECT_EQ(Vocabulary::from_tokens(v.tokens()).tokens(), v.tokens());
}

TEST(CloseSplit, LabelCounts) {
  const auto big = close_split(labelled_corpus(150), 0.5, 1);
  EXPECT_EQ(big.ind.num_labels(), 75u);
  EXPECT_EQ(big.ood.num_labels(), 75u);
  const auto quarter = close_split(labelled_corpus(8), 0.25, 1);
  EXPECT_EQ(quarter.ind.num_labels(), 2u);
  EXPECT_EQ(quarter.ood.num_labels(), 6u);
}

TEST(CloseSplit, SameSeedSamePartition) {
  const Corpus c = labelled_corpus(20);
  EXPECT_EQ(close_split(c, 0.5, 9).ind.label_names, close_split(c, 0.5, 9).ind.label_names);
  EXPECT_EQ(error_code_of([&] { close_split(c, 1.0, 1); }), "invalid-ratio");
}

TEST(CloseSplit, PartitionsLabelsOnRandomInstances) {
  gen::Source src(21);
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = src.size(2, 30);
    const double ratio = src.uniform(0.01, 0.99);
    const std::size_t k_ind = ind_label_count(ratio, k);
    const Corpus c = labelled_corpus(k, 1);
    if (k_ind == 0 || k_ind >= k) {
      EXPECT_EQ(error_code_of([&] { close_split(c, ratio, t); }), "degenerate-split");
      continue;
    }
    const auto s = close_split(c, ratio, static_cast<std::uint64_t>(t));
    EXPECT_EQ(s.ind.num_labels(), static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(k) - 1e-9)));
    auto all = names(s.ind);
    for (const auto& n : s.ood.label_names) EXPECT_TRUE(all.insert(n).second) << "label in both halves: " << n;
    EXPECT_EQ(all, names(c));
    for (const auto& e : s.ind.train) EXPECT_LT(static_cast<std::size_t>(e.label), s.ind.num_labels());
    for (const auto& e : s.ind.test) EXPECT_EQ(s.ind.label_names[e.label].substr(0, 7), "intent_");
  }
}

TEST(FarPair, OverlappingClincIntentsAreRemoved) {
  const std::vector<std::string> overlap = {"play_music",          "update_playlist",    "weather",
                                            "confirm_reservation", "restaurant_reservation", "cancel_reservation",
                                            "accept_reservations"};
  json doc = {{"train", json::array()}};
  for (const auto& l : overlap) doc["train"].push_back(json::array({"utterance for " + l, l}));
  for (const std::string l : {"balance", "timer", "translate"}) doc["train"].push_back(json::array({"about " + l, l}));
  const Corpus clinc = parse_corpus(doc);
  const Corpus snips = parse_corpus(json::parse(R"({"test": [["play some jazz", "PlayMusic"]]})"), false);
  const auto p = far_pair(clinc, snips, overlap);
  EXPECT_EQ(p.ind.num_labels(), 3u);
  for (const auto& l : overlap) EXPECT_EQ(p.ind.label_id(l), -1);
  EXPECT_EQ(p.ood_test.size(), 1u);

  const auto unchanged = far_pair(clinc, snips, {});
  EXPECT_EQ(unchanged.ind.label_names, clinc.label_names);
  EXPECT_EQ(unchanged.ind.train.size(), clinc.train.size());
}

TEST(FarPair, SyntheticPairingDropsTheSharedClass) {
  const Corpus a = load_corpus(std::filesystem::path(LACL_DATA_DIR) / "intents8.json");
  const Corpus b = load_corpus(std::filesystem::path(LACL_DATA_DIR) / "intents_far.json");
  std::vector<std::string> shared;
  for (const auto& l : a.label_names)
    if (b.label_id(l) >= 0) shared.push_back(l);
  ASSERT_EQ(shared.size(), 1u);
  const auto p = far_pair(a, b, load_exclusions(std::filesystem::path(LACL_DATA_DIR) / "synthetic_far.txt"));
  EXPECT_EQ(p.ind.num_labels(), a.num_labels() - 1);
  EXPECT_EQ(p.ind.label_id(shared.front()), -1);
  EXPECT_TRUE(p.ind.oos.empty());
}

TEST(FarPair, DomainNamesExcludeWholeDomains) {
  const Corpus a = load_corpus(std::filesystem::path(LACL_DATA_DIR) / "intents8.json");
  const Corpus b = load_corpus(std::filesystem::path(LACL_DATA_DIR) / "intents_far.json");
  const auto p = far_pair(a, b, {"banking"});
  EXPECT_EQ(p.ind.num_labels(), a.num_labels() - 2);
  EXPECT_EQ(error_code_of([&] { far_pair(a, b, {"no_such_intent"}); }), "unknown-exclusion");
}

TEST(BatchIter, SizesAndDeterminism) {
  const auto b = batch_iter(10, 4, 3, 1);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].size(), 4u);
  EXPECT_EQ(b[1].size(), 4u);
  EXPECT_EQ(b[2].size(), 2u);
  EXPECT_EQ(b, batch_iter(10, 4, 3, 1));
  EXPECT_NE(b, batch_iter(10, 4, 3, 2));
  EXPECT_EQ(error_code_of([] { batch_iter(10, 1, 3, 1); }), "invalid-batch-size");
}

TEST(BatchIter, EveryEpochIsAPermutation) {
  gen::Source src(8);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = src.size(0, 70), bs = src.size(2, 16);
    std::vector<std::size_t> seen;
    for (const auto& batch : batch_iter(n, bs, t, t * 3)) {
      EXPECT_LE(batch.size(), bs);
      seen.insert(seen.end(), batch.begin(), batch.end());
    }
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(seen[i], i);
    EXPECT_EQ(seen.size(), n);
  }
}

TEST(BatchIter, DeskDefaultBatchIs32) { EXPECT_EQ(TrainConfig{}.batch_size, 32u); }
