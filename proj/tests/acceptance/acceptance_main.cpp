// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lacl/data/corpus.hpp"
#include "lacl/data/split.hpp"
#include "lacl/diagnostics/gradcheck_suite.hpp"
#include "lacl/metrics/evaluate.hpp"
#include "lacl/trainer/trainer.hpp"
#include "support/bridge.hpp"
#include "support/oracles.hpp"

using namespace lacl;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(int n, bool pass, const std::string& detail) {
  std::printf("criterion %d %s %s\n", n, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void info(const std::string& line) {
  std::printf("INFO %s\n", line.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// 1 -------------------------------------------------------------------------

void gradient_oracle() {
  const auto t0 = Clock::now();
  auto s = diagnostics::small_objective();
  s.max_coords = 256;  // random coordinates per trial
  const auto r = diagnostics::check_objective_many(s, 100, 1);
  const double secs = seconds_since(t0);
  verdict(1, r.max_rel_error < 1e-4 && secs < 60.0 && r.trials + r.skipped == 100,
          "max_rel_error=" + fmt("%.3e", r.max_rel_error) + " coords_per_trial=256 trials=" + std::to_string(r.trials) +
              " skipped=" + std::to_string(r.skipped) + " seconds=" + fmt("%.1f", secs));
}

// 2 -------------------------------------------------------------------------

void scl_oracle() {
  gen::Source src(2);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = src.size(2, 16);
    const auto z = src.unit_rows(n, src.size(2, 16));
    const auto labels = src.paired_labels(n);
    const double tau = t % 2 ? 1.0 : 0.05;
    const double expected = oracle::scl_literal(z, labels, tau);
    worst = std::max(worst, std::abs(scl_loss(bridge::to_tensor(z), labels, tau) - expected));
    Tape tape(false);
    const double taped = ops::scl_loss(tape.constant(bridge::to_tensor(z)), labels, tau).value().item();
    worst = std::max(worst, std::abs(taped - expected));
  }
  verdict(2, worst <= 1e-10, "max_abs_diff=" + fmt("%.3e", worst) + " batches=200");
}

// 3 -------------------------------------------------------------------------

void cr_properties() {
  gen::Source src(3);
  std::size_t range_bad = 0, scale_bad = 0, bound_bad = 0, mono_bad = 0;
  const int instances = 200;
  for (int t = 0; t < instances; ++t) {
    const std::size_t layers = src.size(1, 6), width = src.size(1, 8), n = src.size(2, 16);
    Tensor c = bridge::to_tensor(src.mat(n, layers * width));
    if (src.coin())
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t j = width; j < layers * width; ++j) c(b, j) = c(b, j - width) + 0.2 * src.normal();
    for (std::size_t l = 0; l + 1 < layers; ++l)
      for (std::size_t d = 0; d < width; ++d) {
        const double r = adjacent_correlation(c, layers, l, d);
        if (!(r >= -1.0 && r <= 1.0)) ++range_bad;
      }
    const double m = src.uniform(1e-3, 1.0);
    const double loss = cr_loss(c, layers, m);
    if (!(loss >= 0.0 && loss <= static_cast<double>((layers - 1) * width))) ++bound_bad;

    Tensor scaled = c;
    for (std::size_t j = 0; j < layers * width; ++j) {
      const double s = src.uniform(0.01, 100.0);
      for (std::size_t b = 0; b < n; ++b) scaled(b, j) *= s;
    }
    bool same = std::abs(cr_loss(scaled, layers, m) - loss) <= 1e-12;
    for (std::size_t l = 0; l + 1 < layers; ++l)
      for (std::size_t d = 0; d < width; ++d)
        same = same && std::abs(adjacent_correlation(scaled, layers, l, d) - adjacent_correlation(c, layers, l, d)) <= 1e-12;
    if (!same) ++scale_bad;

    double prev = cr_loss(c, layers, 1e-9);
    for (int k = 1; k <= 20; ++k) {
      const double cur = cr_loss(c, layers, k / 20.0);
      if (cur > prev) {
        ++mono_bad;
        break;
      }
      prev = cur;
    }
  }
  verdict(3, range_bad + scale_bad + bound_bad + mono_bad == 0,
          "instances=" + std::to_string(instances) + " range_violations=" + std::to_string(range_bad) +
              " scale_violations=" + std::to_string(scale_bad) + " bound_violations=" + std::to_string(bound_bad) +
              " monotone_violations=" + std::to_string(mono_bad));
}

// 4 -------------------------------------------------------------------------

void metric_oracles() {
  gen::Source src(4);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const bool coarse = t % 2 == 0;  // every other set is heavy with ties
    auto draw = [&](std::size_t n) {
      std::vector<double> v(n);
      for (double& x : v) x = coarse ? std::round(src.uniform(-3, 3)) : src.normal();
      return v;
    };
    const auto ind = draw(src.size(1, 40));
    const auto ood = draw(src.size(1, 40));
    worst = std::max(worst, std::abs(auroc(ind, ood) - oracle::roc_trapezoid(ind, ood)));
  }
  std::vector<double> ind;
  for (int i = 1; i <= 20; ++i) ind.push_back(i);
  const std::vector<double> ood{0, 1.5, 3, 10};
  const double fpr = fpr_at_tpr95(ind, ood);
  verdict(4, worst <= 1e-12 && fpr == 0.5,
          "max_auroc_diff=" + fmt("%.3e", worst) + " score_sets=1000 fpr_example=" + fmt("%.17g", fpr));
}

// 5 -------------------------------------------------------------------------

void mahalanobis_oracle() {
  gen::Source src(5);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = src.size(1, 8), k = src.size(1, 4);
    const auto mu_rows = src.mat(k, d, 3.0);
    Eigen::MatrixXd mu(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
    std::vector<int> classes;
    for (std::size_t c = 0; c < k; ++c) {
      classes.push_back(static_cast<int>(c));
      for (std::size_t j = 0; j < d; ++j) mu(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = mu_rows[c][j];
    }
    const auto s = GaussianStats::from_moments(classes, mu, Eigen::MatrixXd::Identity(mu.cols(), mu.cols()), 0.0);
    const auto x = src.vec(d, 3.0);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& row : mu_rows) {
      double e = 0.0;
      for (std::size_t j = 0; j < d; ++j) e += (x[j] - row[j]) * (x[j] - row[j]);
      best = std::min(best, e);
    }
    worst = std::max(worst, std::abs(mahalanobis_score(x, s) + best));
  }
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(1, 2);
  Eigen::MatrixXd cov(2, 2);
  cov << 4, 0, 0, 1;
  const std::vector<double> x{2, 1};
  const double hand = mahalanobis_score(x, GaussianStats::from_moments({0}, mu, cov, 0.0));
  verdict(5, worst <= 1e-10 && std::abs(hand + 2.0) <= 1e-12,
          "identity_max_diff=" + fmt("%.3e", worst) + " diag_case=" + fmt("%.17g", hand));
}

// 6 -------------------------------------------------------------------------

void ensemble_equivalence() {
  gen::Source src(6);
  double cos_worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t layers = src.size(1, 5), n = src.size(1, 15), d = src.size(1, 8);
    std::vector<Tensor> bank;
    for (std::size_t l = 0; l < layers; ++l) bank.push_back(bridge::to_tensor(src.mat(n, d)));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 3);
    std::vector<oracle::Vec> q;
    for (std::size_t l = 0; l < layers; ++l) q.push_back(src.vec(d));
    double independent = 0.0;
    for (std::size_t l = 0; l < layers; ++l) {
      double best = -2.0;
      for (const auto& row : bridge::to_mat(bank[l])) best = std::max(best, oracle::cosine(q[l], row));
      independent += best;
    }
    std::vector<std::span<const double>> spans(q.begin(), q.end());
    cos_worst = std::max(cos_worst, std::abs(cosine_ensemble_score(spans, bank, labels).score - independent));
  }

  // L = 2 toy: three classes of six points in 3 dims.
  const auto h1 = src.mat(18, 3), h2 = src.mat(18, 3);
  std::vector<int> labels(18);
  for (std::size_t i = 0; i < 18; ++i) labels[i] = static_cast<int>(i / 6);
  const auto ens = MahalanobisEnsemble::fit({bridge::to_tensor(h1), bridge::to_tensor(h2)}, labels, 1e-6);
  oracle::Mat t1 = h1;
  for (auto& row : t1) row = oracle::tanh_of(row);
  const auto g1 = oracle::fit_tied(t1, labels, 1e-6);
  const auto g2 = oracle::fit_tied(h2, labels, 1e-6);
  double maha_worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto a = src.vec(3), b = src.vec(3);
    const double hand = -(oracle::min_distance(b, g2) + oracle::min_distance(oracle::tanh_of(a), g1));
    maha_worst = std::max(maha_worst, std::abs(ens.score({a, b}).score - hand));
  }
  verdict(6, cos_worst <= 1e-12 && maha_worst <= 1e-10,
          "cosine_max_diff=" + fmt("%.3e", cos_worst) + " maha_max_diff=" + fmt("%.3e", maha_worst));
}

// 7 and 8 -------------------------------------------------------------------

struct RunResult {
  double auroc = 0.0;
  double mean_adj_cor = 0.0;
  std::map<std::string, double> layerwise;
  double ood_mean = 0.0;
  double ind_right_mean = 0.0;
  double within_cos = 0.0;
  double between_cos = 0.0;
};

RunResult run_desk(const CloseSplit& split, TrainMode mode, double lambda1, std::uint64_t seed,
                   const ParaphraseSidecar& sidecar) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.lambda1 = lambda1;
  cfg.model.mode = mode;
  const auto trained = train(split.ind, EncoderConfig{}, cfg, &sidecar);
  EvalOptions opt;
  opt.scorers = {"cosine-single"};
  const auto out = evaluate(trained.model, split.ind.train, split.ind.test, split.ood.test, opt);
  RunResult r;
  r.auroc = out.report.scorers.front().auroc;
  r.mean_adj_cor = trained.report.epochs.back().mean_adj_cor;
  r.layerwise = out.report.layerwise_auroc;
  std::size_t n_ood = 0, n_right = 0;
  for (const auto& s : out.scores) {
    if (s.is_ood) {
      r.ood_mean += s.score;
      ++n_ood;
    } else if (s.pred_label == s.true_label) {
      r.ind_right_mean += s.score;
      ++n_right;
    }
  }
  r.ood_mean /= static_cast<double>(std::max<std::size_t>(n_ood, 1));
  r.ind_right_mean /= static_cast<double>(std::max<std::size_t>(n_right, 1));
  const Tensor& z = out.bank.emb.z;
  double within = 0.0, between = 0.0;
  std::size_t nw = 0, nb = 0;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = i + 1; j < z.rows(); ++j) {
      const double c = cosine_similarity(z.row(i), z.row(j));
      if (out.bank.labels[i] == out.bank.labels[j]) within += c, ++nw;
      else between += c, ++nb;
    }
  r.within_cos = within / static_cast<double>(std::max<std::size_t>(nw, 1));
  r.between_cos = between / static_cast<double>(std::max<std::size_t>(nb, 1));
  return r;
}

void desk_experiments() {
  const std::filesystem::path data(LACL_DATA_DIR);
  const Corpus corpus = load_corpus(data / "intents8.json");
  const auto sidecar = ParaphraseSidecar::load(data / "paraphrases.json");
  std::vector<RunResult> lacl, ce, no_cr;
  const auto t0 = Clock::now();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto split = close_split(corpus, 0.5, seed);
    lacl.push_back(run_desk(split, TrainMode::Lacl, 1.0, seed, sidecar));
    ce.push_back(run_desk(split, TrainMode::CeBaseline, 1.0, seed, sidecar));
    info("seed " + std::to_string(seed) + " lacl_auroc=" + fmt("%.4f", lacl.back().auroc) +
         " ce_auroc=" + fmt("%.4f", ce.back().auroc));
  }
  const double secs7 = seconds_since(t0);
  std::vector<double> a_lacl, a_ce;
  for (const auto& r : lacl) a_lacl.push_back(r.auroc);
  for (const auto& r : ce) a_ce.push_back(r.auroc);
  const double med_lacl = median3(a_lacl), med_ce = median3(a_ce);
  verdict(7, med_lacl >= 0.90 && med_lacl >= med_ce && secs7 < 900.0,
          "median_lacl_auroc=" + fmt("%.4f", med_lacl) + " median_ce_auroc=" + fmt("%.4f", med_ce) +
              " seconds=" + fmt("%.0f", secs7));

  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto split = close_split(corpus, 0.5, seed);
    no_cr.push_back(run_desk(split, TrainMode::Lacl, 0.0, seed, sidecar));
  }
  bool cor_lower = true;
  int non_worse = 0;
  std::string detail;
  for (std::size_t s = 0; s < 3; ++s) {
    cor_lower = cor_lower && lacl[s].mean_adj_cor < no_cr[s].mean_adj_cor;
    non_worse += lacl[s].auroc >= no_cr[s].auroc;
    detail += " seed" + std::to_string(s + 1) + ":cor " + fmt("%.4f", lacl[s].mean_adj_cor) + " vs " +
              fmt("%.4f", no_cr[s].mean_adj_cor) + ", auroc " + fmt("%.4f", lacl[s].auroc) + " vs " +
              fmt("%.4f", no_cr[s].auroc);
  }
  verdict(8, cor_lower && non_worse >= 2, "non_worse_auroc_seeds=" + std::to_string(non_worse) + detail);

  int top_beats_bottom = 0, ood_lower = 0, tighter = 0;
  for (const auto& r : lacl) {
    top_beats_bottom += r.layerwise.at("4") >= r.layerwise.at("1");
    ood_lower += r.ood_mean < r.ind_right_mean;
    tighter += r.within_cos > r.between_cos;
    info("layerwise_auroc layer1=" + fmt("%.4f", r.layerwise.at("1")) + " layer4=" + fmt("%.4f", r.layerwise.at("4")) +
         " z=" + fmt("%.4f", r.layerwise.at("z")) + " within_cos=" + fmt("%.4f", r.within_cos) +
         " between_cos=" + fmt("%.4f", r.between_cos) + " ood_mean=" + fmt("%.4f", r.ood_mean) +
         " ind_right_mean=" + fmt("%.4f", r.ind_right_mean));
  }
  info("layer4_auroc_ge_layer1_seeds=" + std::to_string(top_beats_bottom) + "/3 ood_mean_below_ind_right_seeds=" +
       std::to_string(ood_lower) + "/3 within_cos_above_between_seeds=" + std::to_string(tighter) + "/3");
}

// 9 -------------------------------------------------------------------------

void determinism() {
  const Corpus corpus = load_corpus(std::filesystem::path(LACL_DATA_DIR) / "intents8.json");
  const auto split = close_split(corpus, 0.5, 7);
  auto once = [&] {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 7;
    EncoderConfig enc;
    enc.hidden = 32;
    enc.heads = 2;
    const auto trained = train(split.ind, enc, cfg);
    return evaluate(trained.model, split.ind.train, split.ind.test, split.ood.test, EvalOptions{})
        .report.to_json()
        .dump();
  };
  const std::string a = once(), b = once();
  verdict(9, a == b, "bytes=" + std::to_string(a.size()) + (a == b ? " identical" : " differ"));
}

// 10 ------------------------------------------------------------------------

void shape_contract() {
  gen::Source src(10);
  const Corpus corpus = load_corpus(std::filesystem::path(LACL_DATA_DIR) / "intents8.json");
  const auto vocab = Vocabulary::build(corpus.train);
  const std::vector<LabeledExample> queries(corpus.test.begin(), corpus.test.begin() + 3);
  int configs = 0, bad = 0;
  for (int t = 0; t < 40; ++t) {
    EncoderConfig enc;
    enc.layers = src.size(1, 6);
    enc.heads = src.size(1, 3);
    enc.hidden = enc.layers * enc.heads * src.size(1, 4);
    enc.ff_mult = src.size(1, 2);
    ModelOptions opt;
    opt.sharing = src.coin() ? GclSharing::Shared : GclSharing::PerLayer;
    opt.gcl_hidden = src.size(0, 12);
    const Model m = init_model(enc, opt, vocab, corpus.label_names, static_cast<std::uint64_t>(t));
    const auto e = embed(m, queries);
    bool ok = e.z.cols() == enc.hidden && e.compressed.size() == enc.layers;
    for (const auto& c : e.compressed) ok = ok && c.cols() == enc.hidden / enc.layers;
    ++configs;
    bad += !ok;
  }
  verdict(10, bad == 0, "configs=" + std::to_string(configs) + " violations=" + std::to_string(bad));
}

void guarded(int n, const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    verdict(n, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  guarded(1, gradient_oracle);
  guarded(2, scl_oracle);
  guarded(3, cr_properties);
  guarded(4, metric_oracles);
  guarded(5, mahalanobis_oracle);
  guarded(6, ensemble_equivalence);
  guarded(7, desk_experiments);
  guarded(9, determinism);
  guarded(10, shape_contract);
  return failures == 0 ? 0 : 1;
}
