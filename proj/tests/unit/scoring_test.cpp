#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "lacl/scoring/bank.hpp"
#include "lacl/scoring/cosine.hpp"
#include "lacl/scoring/mahalanobis.hpp"
#include "lacl/scoring/threshold.hpp"
#include "support/bridge.hpp"
#include "support/errors.hpp"
#include "support/oracles.hpp"

using namespace lacl;

namespace {

// Bank with `layers` pooled layers of width `dim`, compressed layers of width
// dim / layers and z their concatenation. Labels alternate over `classes`.
EmbeddingBank random_bank(std::size_t n, std::size_t layers, std::size_t dim, int classes, gen::Source& src) {
  EmbeddingBank b;
  for (std::size_t l = 0; l < layers; ++l) {
    b.emb.pooled.push_back(bridge::to_tensor(src.mat(n, dim)));
    b.emb.compressed.push_back(bridge::to_tensor(src.mat(n, dim / layers)));
  }
  b.emb.z = Tensor({n, dim});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < layers; ++l)
      for (std::size_t d = 0; d < dim / layers; ++d) b.emb.z(i, l * (dim / layers) + d) = b.emb.compressed[l](i, d);
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(i % static_cast<std::size_t>(classes)));
  return b;
}

}  // namespace

TEST(CosineScore, BankMemberScoresOne) {
  gen::Source src(1);
  const auto bank = random_bank(10, 4, 64, 3, src);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto nn = cosine_score(bank.emb.z.row(i), bank, SliceMode::Full);
    EXPECT_NEAR(nn.score, 1.0, 1e-12);
    EXPECT_EQ(nn.label, bank.labels[i]);
  }
}

TEST(CosineScore, TiesKeepTheFirstRow) {
  const Tensor bank = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const std::vector<int> labels{4, 7};
  const std::vector<double> q{1, 1};
  const auto nn = cosine_nearest(q, bank, labels);
  EXPECT_NEAR(nn.score, 0.70710678, 1e-8);
  EXPECT_EQ(nn.index, 0u);
  EXPECT_EQ(nn.label, 4);
}

TEST(CosineScore, MatchesBruteForceOnRandomBanks) {
  gen::Source src(2);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = src.size(1, 20), d = src.size(1, 10);
    const auto bank = src.mat(n, d);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(src.size(0, 4));
    const auto q = src.vec(d);
    double best = -2.0;
    for (const auto& row : bank) best = std::max(best, oracle::cosine(q, row));
    EXPECT_NEAR(cosine_nearest(q, bridge::to_tensor(bank), labels).score, best, 1e-12);
  }
}

TEST(ZSegment, UpperHalfOfFourLayersIsThirtyTwoDims) {
  gen::Source src(3);
  const auto bank = random_bank(5, 4, 64, 2, src);
  const Tensor upper = z_segment(bank.emb, SliceMode::UpperHalf);
  ASSERT_EQ(upper.cols(), 32u);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 32; ++j) EXPECT_EQ(upper(i, j), bank.emb.compressed[2 + j / 16](i, j % 16));
  EXPECT_EQ(z_segment(bank.emb, SliceMode::Full).storage(), bank.emb.z.storage());

  Embeddings ce;
  ce.pooled.resize(4);
  ce.z = bank.emb.z;
  EXPECT_EQ(error_code_of([&] { z_segment(ce, SliceMode::UpperHalf); }), "unsupported-slice");
}

TEST(ZSegment, ModelTrainedOnTheUpperHalfIsAlreadyTheSegment) {
  gen::Source src(4);
  auto bank = random_bank(5, 4, 64, 2, src);
  Embeddings upper_only;
  upper_only.pooled = bank.emb.pooled;
  upper_only.compressed = {bank.emb.compressed[2], bank.emb.compressed[3]};
  upper_only.compressed_begin = 2;
  upper_only.z = z_segment(bank.emb, SliceMode::UpperHalf);
  EXPECT_EQ(z_segment(upper_only, SliceMode::UpperHalf).storage(), upper_only.z.storage());
}

TEST(Mahalanobis, HandExamples) {
  Eigen::MatrixXd mu(1, 2);
  mu << 0, 0;
  const auto identity = GaussianStats::from_moments({0}, mu, Eigen::MatrixXd::Identity(2, 2), 0.0);
  const std::vector<double> at_mean{0, 0}, x{3, 4};
  EXPECT_EQ(mahalanobis_score(at_mean, identity), 0.0);
  EXPECT_NEAR(mahalanobis_score(x, identity), -25.0, 1e-10);

  Eigen::MatrixXd cov(2, 2);
  cov << 4, 0, 0, 1;
  const auto diag = GaussianStats::from_moments({0}, mu, cov, 0.0);
  const std::vector<double> y{2, 1};
  EXPECT_NEAR(mahalanobis_score(y, diag), -2.0, 1e-12);

  Eigen::MatrixXd singular = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_EQ(error_code_of([&] { GaussianStats::from_moments({0}, mu, singular, 0.0); }), "singular-covariance");
  EXPECT_EQ(error_code_of([&] { GaussianStats::from_moments({0}, mu, cov, -1.0); }), "invalid-ridge");
}

TEST(Mahalanobis, NearestClassIsPredicted) {
  Eigen::MatrixXd mu(2, 2);
  mu << 0, 0, 10, 0;
  const auto s = GaussianStats::from_moments({3, 8}, mu, Eigen::MatrixXd::Identity(2, 2), 0.0);
  const std::vector<double> x{9, 1};
  const auto r = mahalanobis_nearest(x, s);
  EXPECT_EQ(r.label, 8);
  EXPECT_NEAR(r.distance, 2.0, 1e-12);
}

TEST(Mahalanobis, FitMatchesTiedCovarianceOracle) {
  gen::Source src(5);
  for (int t = 0; t < 30; ++t) {
    const std::size_t d = src.size(1, 5), k = src.size(1, 3), n = k * src.size(d + 2, d + 8);
    const auto x = src.mat(n, d);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % k);
    const double ridge = 1e-6;
    const auto fit = mahalanobis_fit(bridge::to_tensor(x), labels, ridge);
    const auto ref = oracle::fit_tied(x, labels, ridge);
    for (int q = 0; q < 5; ++q) {
      const auto v = src.vec(d, 2.0);
      const double expected = oracle::min_distance(v, ref);
      EXPECT_NEAR(mahalanobis_score(v, fit), -expected, 1e-8 * std::max(1.0, expected));
    }
  }
}

TEST(Mahalanobis, FitRejectsSingletonClasses) {
  const Tensor x = Tensor::matrix(3, 1, {1, 2, 3});
  const std::vector<int> labels{0, 0, 1};
  EXPECT_EQ(error_code_of([&] { mahalanobis_fit(x, labels); }), "insufficient-class-examples");
}

TEST(CosineEnsemble, SingleLayerEqualsSingleScore) {
  gen::Source src(6);
  const auto bank = random_bank(12, 1, 8, 3, src);
  for (int t = 0; t < 20; ++t) {
    const auto q = src.vec(8);
    const auto e = cosine_ensemble_score({q}, bank.emb.pooled, bank.labels);
    const auto nn = cosine_nearest(q, bank.emb.pooled[0], bank.labels);
    EXPECT_DOUBLE_EQ(e.score, nn.score);
    EXPECT_EQ(e.label, nn.label);
  }
}

TEST(CosineEnsemble, BankMemberScoresLayerCount) {
  gen::Source src(7);
  for (std::size_t layers : {1u, 2u, 4u}) {
    const auto bank = random_bank(9, layers, 8 * layers, 3, src);
    for (std::size_t i = 0; i < 9; ++i) {
      const auto e = cosine_ensemble_score(layer_rows(bank.emb.pooled, i), bank.emb.pooled, bank.labels);
      EXPECT_NEAR(e.score, static_cast<double>(layers), 1e-12);
      EXPECT_EQ(e.label, bank.labels[i]);
    }
  }
  const std::vector<double> q{1, 0};
  EXPECT_EQ(error_code_of([&] { cosine_ensemble_score({q}, {}, {}); }), "missing-layer-bank");
}

TEST(MahalanobisEnsemble, SingleLayerUsesRawFeatures) {
  gen::Source src(8);
  const auto bank = random_bank(20, 1, 4, 2, src);
  const auto ens = MahalanobisEnsemble::fit(bank.emb.pooled, bank.labels);
  const auto single = mahalanobis_fit(bank.emb.pooled[0], bank.labels);
  for (int t = 0; t < 20; ++t) {
    const auto q = src.vec(4);
    const auto r = ens.score({q});
    EXPECT_NEAR(r.score, mahalanobis_score(q, single), 1e-12);
    EXPECT_EQ(r.label, mahalanobis_nearest(q, single).label);
  }
}

TEST(MahalanobisEnsemble, TwoLayersMatchOracle) {
  gen::Source src(9);
  const auto bank = random_bank(30, 2, 4, 3, src);
  const auto ens = MahalanobisEnsemble::fit(bank.emb.pooled, bank.labels, 1e-6);
  oracle::Mat first = bridge::to_mat(bank.emb.pooled[0]);
  for (auto& row : first) row = oracle::tanh_of(row);
  const auto g1 = oracle::fit_tied(first, bank.labels, 1e-6);
  const auto g2 = oracle::fit_tied(bridge::to_mat(bank.emb.pooled[1]), bank.labels, 1e-6);
  for (int t = 0; t < 20; ++t) {
    const auto a = src.vec(4), b = src.vec(4);
    const double expected = -(oracle::min_distance(oracle::tanh_of(a), g1) + oracle::min_distance(b, g2));
    const auto r = ens.score({a, b});
    EXPECT_NEAR(r.score, expected, 1e-8 * std::max(1.0, std::abs(expected)));
    std::size_t best = 0;
    double best_sum = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < g1.means.size(); ++c) {
      const double s = oracle::squared_distance(oracle::tanh_of(a), g1.means[c], g1.precision) +
                       oracle::squared_distance(b, g2.means[c], g2.precision);
      if (s < best_sum) best_sum = s, best = c;
    }
    EXPECT_EQ(r.label, static_cast<int>(best));
  }
}

TEST(Layerwise, OneRowPerQueryPerLayerPlusZ) {
  gen::Source src(10);
  const auto bank = random_bank(12, 2, 8, 3, src);
  const auto queries = random_bank(4, 2, 8, 3, src);
  const std::vector<std::string> ids{"a", "b", "c", "d"};
  const std::vector<bool> ood{false, false, true, true};
  const std::vector<int> truth{0, 1, -1, -1};
  const auto rec = layerwise_scores(queries.emb, ids, ood, truth, bank, ScoreKind::Cosine, "layerwise");
  ASSERT_EQ(rec.size(), 12u);
  std::map<std::string, std::size_t> per_layer;
  for (const auto& r : rec) ++per_layer[r.layer];
  EXPECT_EQ(per_layer, (std::map<std::string, std::size_t>{{"1", 4}, {"2", 4}, {"z", 4}}));
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& z = rec[8 + i];
    EXPECT_EQ(z.layer, "z");
    EXPECT_EQ(z.score, cosine_score(queries.emb.z.row(i), bank, SliceMode::Full).score);
    EXPECT_EQ(rec[i].score, cosine_nearest(queries.emb.pooled[0].row(i), bank.emb.pooled[0], bank.labels).score);
  }
  const auto maha = layerwise_scores(queries.emb, ids, ood, truth, bank, ScoreKind::Mahalanobis, "layerwise");
  const auto stats = mahalanobis_fit(bank.emb.pooled[1], bank.labels);
  EXPECT_DOUBLE_EQ(maha[4].score, mahalanobis_score(queries.emb.pooled[1].row(0), stats));
}

TEST(Threshold, Examples) {
  std::vector<double> s;
  for (int i = 1; i <= 20; ++i) s.push_back(i);
  EXPECT_EQ(threshold_at_tpr(s, 0.95), 2.0);
  EXPECT_EQ(threshold_at_tpr(s, 1.0), 1.0);
  EXPECT_EQ(decide(2.0, 2.0), Decision::Ind);
  EXPECT_EQ(decide(1.999, 2.0), Decision::Ood);
  EXPECT_EQ(error_code_of([] { threshold_at_tpr({}, 0.95); }), "empty-scores");
  const std::vector<double> one{1.0};
  EXPECT_EQ(error_code_of([&] { threshold_at_tpr(one, 0.0); }), "invalid-tpr");
}

TEST(Threshold, KeepsAtLeastTheRequestedFraction) {
  gen::Source src(11);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = src.size(1, 60);
    std::vector<double> s(n);
    for (double& v : s) v = std::round(src.uniform(-5, 5) * 4) / 4;  // ties on purpose
    const double tpr = src.uniform(0.01, 1.0);
    const double delta = threshold_at_tpr(s, tpr);
    const auto kept = static_cast<double>(std::count_if(s.begin(), s.end(), [&](double v) { return v >= delta; }));
    EXPECT_GE(kept / static_cast<double>(n), tpr - 1e-9);
    EXPECT_NE(std::find(s.begin(), s.end(), delta), s.end());
  }
}

TEST(Bank, SaveThenLoadRoundTrips) {
  gen::Source src(12);
  auto bank = random_bank(6, 2, 8, 2, src);
  bank.provenance = {"ckpt", "corpus"};
  const auto path = std::filesystem::temp_directory_path() / "lacl_bank_roundtrip.json";
  save_bank(bank, path);
  const auto back = load_bank(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.labels, bank.labels);
  EXPECT_EQ(back.provenance.checkpoint_id, "ckpt");
  EXPECT_EQ(back.emb.z.storage(), bank.emb.z.storage());
  ASSERT_EQ(back.emb.pooled.size(), 2u);
  EXPECT_EQ(back.emb.pooled[1].storage(), bank.emb.pooled[1].storage());
  EXPECT_EQ(back.emb.compressed[0].storage(), bank.emb.compressed[0].storage());
  EXPECT_EQ(error_code_of([] { load_bank("/nonexistent/bank.json"); }), "file-not-found");
}
