#include <gtest/gtest.h>

#include <algorithm>

#include "lacl/augment/augment.hpp"
#include "support/errors.hpp"
#include "support/oracles.hpp"

using namespace lacl;

namespace {

using Entries = std::map<std::string, std::vector<std::string>>;

std::size_t count_masked(const std::vector<int>& t) {
  return static_cast<std::size_t>(std::count(t.begin(), t.end(), Vocabulary::kMask));
}

std::vector<int> iota_tokens(std::size_t n) {
  std::vector<int> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<int>(10 + i);
  return t;
}

Vocabulary small_vocab() {
  return Vocabulary::build({{"check my balance what is show", {}, 0, {}}, {"the weather today", {}, 1, {}}});
}

}  // namespace

TEST(RandomSpanMask, OneSpanOfTwoOnTenTokens) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = random_span_mask(iota_tokens(10), 0.2, 2, seed);
    ASSERT_EQ(count_masked(out), 2u);
    const auto first = std::find(out.begin(), out.end(), Vocabulary::kMask);
    EXPECT_EQ(*(first + 1), Vocabulary::kMask) << "mask is not one contiguous span";
  }
}

TEST(RandomSpanMask, DegenerateInputs) {
  EXPECT_EQ(random_span_mask(iota_tokens(10), 0.0, 2, 1), iota_tokens(10));
  EXPECT_EQ(random_span_mask(iota_tokens(1), 0.9, 2, 1), iota_tokens(1));
  EXPECT_EQ(error_code_of([] { random_span_mask({}, 0.5, 2, 1); }), "empty-sequence");
}

TEST(RandomSpanMask, CoverageAndUntouchedTokensOnRandomInstances) {
  gen::Source src(2);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = src.size(1, 40), span = src.size(1, 5);
    const double rate = src.uniform(0.0, 1.0);
    const auto in = iota_tokens(n);
    const auto out = random_span_mask(in, rate, span, static_cast<std::uint64_t>(t));
    ASSERT_EQ(out.size(), n);
    const auto expected = std::min<std::size_t>(static_cast<std::size_t>(std::ceil(rate * n - 1e-9)), n - 1);
    EXPECT_EQ(count_masked(out), expected) << "n=" << n << " rate=" << rate << " span=" << span;
    for (std::size_t i = 0; i < n; ++i)
      if (out[i] != Vocabulary::kMask) {
        EXPECT_EQ(out[i], in[i]);
      }
  }
}

TEST(TokenCutoff, Examples) {
  const std::vector<int> abcd{11, 12, 13, 14};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto out = token_cutoff(abcd, 0.5, seed);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_LT(std::find(abcd.begin(), abcd.end(), out[0]), std::find(abcd.begin(), abcd.end(), out[1]));
  }
  EXPECT_EQ(token_cutoff(abcd, 0.0, 3), abcd);
  EXPECT_EQ(token_cutoff({11}, 0.9, 3), std::vector<int>{11});
}

TEST(TokenCutoff, KeepsASubsequenceOnRandomInstances) {
  gen::Source src(4);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = src.size(1, 30);
    const double rate = src.uniform(0.0, 1.0);
    const auto in = iota_tokens(n);
    const auto out = token_cutoff(in, rate, static_cast<std::uint64_t>(t));
    const auto drop = std::min<std::size_t>(static_cast<std::size_t>(std::floor(rate * n + 1e-9)), n - 1);
    EXPECT_EQ(out.size(), n - drop);
    EXPECT_TRUE(std::is_sorted(out.begin(), out.end()));  // iota input: order preserved means sorted
  }
}

TEST(TokenShuffle, PermutesDeterministically) {
  const std::vector<int> abc{11, 12, 13};
  auto out = token_shuffle(abc, 5);
  EXPECT_EQ(out, token_shuffle(abc, 5));
  std::sort(out.begin(), out.end());
  EXPECT_EQ(out, abc);
  EXPECT_EQ(token_shuffle({7}, 5), std::vector<int>{7});
}

TEST(BackTranslate, PicksFromTheSidecar) {
  const ParaphraseSidecar sc(Entries{{"check my balance", {"what is my balance", "show my balance"}},
                              {"hello there", {"Hello  there"}}});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto out = back_translate("check my balance", &sc, seed);
    EXPECT_TRUE(out == "what is my balance" || out == "show my balance") << out;
  }
  EXPECT_EQ(back_translate("not in the sidecar", &sc, 1), "not in the sidecar");
  EXPECT_EQ(back_translate("hello there", &sc, 1), "hello there");
  EXPECT_EQ(back_translate("check my balance", nullptr, 1), "check my balance");
}

TEST(MakeViews, DefaultPolicyMasksRawAndParaphrase) {
  const auto vocab = small_vocab();
  const ParaphraseSidecar sc(Entries{{"check my balance", {"what is my balance"}}});
  const LabeledExample ex{"check my balance", {}, 3, {}};
  const AugmentPolicy policy;
  const auto raw = vocab.encode(ex.text);
  const auto para = vocab.encode("what is my balance");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto v = make_views(ex, policy, vocab, &sc, seed);
    EXPECT_EQ(v.label, 3);
    ASSERT_EQ(v.first.size(), raw.size());
    ASSERT_EQ(v.second.size(), para.size());
    EXPECT_EQ(count_masked(v.first), 1u);  // ceil(0.15 * 3)
    for (std::size_t i = 0; i < raw.size(); ++i)
      if (v.first[i] != Vocabulary::kMask) {
        EXPECT_EQ(v.first[i], raw[i]);
      }
    for (std::size_t i = 0; i < para.size(); ++i)
      if (v.second[i] != Vocabulary::kMask) {
        EXPECT_EQ(v.second[i], para[i]);
      }
  }
}

TEST(MakeViews, ZeroRatesWithoutSidecarGiveIdenticalCopies) {
  const auto vocab = small_vocab();
  AugmentPolicy policy;
  policy.rsm_rate = 0.0;
  const LabeledExample ex{"check my balance", {}, 0, {}};
  const auto v = make_views(ex, policy, vocab, nullptr, 7);
  EXPECT_EQ(v.first, v.second);
  EXPECT_EQ(v.first, vocab.encode(ex.text));
}

TEST(MakeViews, RecipeOverridesAreFollowed) {
  const auto vocab = small_vocab();
  AugmentPolicy policy;
  policy.view1 = parse_recipe("raw");
  policy.view2 = parse_recipe("raw+shuffle");
  const LabeledExample ex{"what is the weather today", {}, 0, {}};
  const auto raw = vocab.encode(ex.text);
  const auto v = make_views(ex, policy, vocab, nullptr, 2);
  EXPECT_EQ(v.first, raw);
  auto sorted = v.second, expected = raw;
  std::sort(sorted.begin(), sorted.end());
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(sorted, expected);

  policy.view2 = parse_recipe("raw,cutoff");
  policy.cutoff_rate = 0.4;
  EXPECT_EQ(make_views(ex, policy, vocab, nullptr, 2).second.size(), raw.size() - 2);
  EXPECT_EQ(error_code_of([] { parse_recipe("raw+telepathy"); }), "unknown-augmentation");
}

TEST(Sidecar, LoadRejectsMalformedFiles) {
  EXPECT_EQ(error_code_of([] { ParaphraseSidecar::load("/nonexistent/sidecar.json"); }), "file-not-found");
}
