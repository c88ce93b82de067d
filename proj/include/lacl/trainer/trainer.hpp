#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lacl/augment/augment.hpp"
#include "lacl/data/batch.hpp"
#include "lacl/data/corpus.hpp"
#include "lacl/data/vocab.hpp"
#include "lacl/encoder/encoder.hpp"
#include "lacl/head/gcl.hpp"
#include "lacl/head/losses.hpp"
#include "lacl/numcore/error.hpp"
#include "lacl/numcore/ops.hpp"
#include "lacl/numcore/random.hpp"
#include "lacl/numcore/tape.hpp"
#include "lacl/trainer/model.hpp"
#include "lacl/trainer/optim.hpp"

namespace lacl {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr_peak = 1e-3;
  double weight_decay = 0.01;
  double tau = 0.05;
  double lambda1 = 1.0;
  double margin = 0.5;
  std::uint64_t seed = 7;
  std::size_t min_freq = 1;
  ModelOptions model;
  AugmentPolicy augment;

  void validate() const {
    if (epochs == 0) throw Error("invalid-config", "epochs must be positive");
    if (batch_size < 2) throw Error("invalid-config", "batch_size must be at least 2");
    if (!(lr_peak > 0.0)) throw Error("invalid-config", "lr_peak must be positive");
    if (weight_decay < 0.0) throw Error("invalid-config", "weight_decay must be non-negative");
    if (!(tau > 0.0)) throw Error("invalid-config", "tau must be positive");
    if (lambda1 < 0.0) throw Error("invalid-config", "lambda1 must be non-negative");
    if (!(margin > 0.0 && margin <= 1.0)) throw Error("invalid-config", "margin must lie in (0, 1]");
    if (min_freq < 1) throw Error("invalid-config", "min_freq must be at least 1");
    augment.validate();
  }
};

inline std::string recipe_string(const std::vector<Augmentation>& r) {
  static const char* names[] = {"raw", "bt", "rsm", "shuffle", "cutoff"};
  std::string out;
  for (auto a : r) out += (out.empty() ? "" : "+") + std::string(names[static_cast<int>(a)]);
  return out;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c, const EncoderConfig& enc) {
  nlohmann::json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr_peak"] = c.lr_peak;
  j["weight_decay"] = c.weight_decay;
  j["tau"] = c.tau;
  j["lambda1"] = c.lambda1;
  j["margin"] = c.margin;
  j["seed"] = c.seed;
  j["min_freq"] = c.min_freq;
  j["mode"] = to_string(c.model.mode);
  j["variant"] = to_string(c.model.variant);
  j["gcl_sharing"] = to_string(c.model.sharing);
  j["gcl_hidden"] = c.model.gcl_hidden ? c.model.gcl_hidden : 2 * enc.hidden;
  j["rsm_rate"] = c.augment.rsm_rate;
  j["rsm_span"] = c.augment.rsm_span;
  j["cutoff_rate"] = c.augment.cutoff_rate;
  j["view1"] = recipe_string(c.augment.view1);
  j["view2"] = recipe_string(c.augment.view2);
  j["layers"] = enc.layers;
  j["hidden"] = enc.hidden;
  j["heads"] = enc.heads;
  j["ff_mult"] = enc.ff_mult;
  j["dropout"] = enc.dropout;
  j["max_len"] = enc.max_len;
  return j;
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;        // rate used at the epoch's first step
  double loss_total = 0.0;
  double loss_scl = 0.0;
  double loss_cr = 0.0;
  double mean_adj_cor = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  nlohmann::json config;
  std::vector<EpochRecord> epochs;
  std::string checkpoint_path;

  // Header line "# config <json>", then one CSV row per epoch. Values are
  // printed with 17 significant digits so the file round-trips exactly.
  void write_csv(std::ostream& out) const {
    out << "# config " << config.dump() << "\n";
    out << "epoch,lr,loss_total,loss_scl,loss_cr,mean_adj_cor\n";
    out << std::setprecision(17);
    for (const auto& e : epochs)
      out << e.epoch << ',' << e.lr << ',' << e.loss_total << ',' << e.loss_scl << ',' << e.loss_cr << ','
          << e.mean_adj_cor << "\n";
  }

  std::string csv() const {
    std::ostringstream s;
    write_csv(s);
    return s.str();
  }
};

struct TrainResult {
  Model model;
  TrainReport report;
};

namespace detail {

// [N x (L*D)] concatenation of pooled layers, for correlation diagnostics.
inline Tensor concat_columns(const std::vector<Var>& parts) {
  const std::size_t n = parts.front().value().rows();
  std::size_t width = 0;
  for (const auto& p : parts) width += p.value().cols();
  Tensor out({n, width});
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, off + j) = v(i, j);
    off += v.cols();
  }
  return out;
}

inline std::vector<int> clip(std::vector<int> ids, std::size_t max_len) {
  if (ids.size() > max_len) ids.resize(max_len);
  return ids;
}

struct StepLosses {
  double total = 0.0, scl = 0.0, cr = 0.0, mean_adj_cor = 0.0;
};

// One LaCL step: two augmented views per example, two stochastic forwards,
// views interleaved as rows (2b-1, 2b), SCL on normalized z plus lambda1 CR
// on the raw concatenation.
inline StepLosses lacl_step(Model& model, const TrainConfig& cfg, const std::vector<LabeledExample>& batch,
                            const ParaphraseSidecar* sidecar, std::uint64_t step_seed) {
  std::vector<std::vector<int>> first, second;
  std::vector<int> labels;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto views = make_views(batch[i], cfg.augment, model.vocab, sidecar, derive_seed({step_seed, 0x617567, i}));
    first.push_back(clip(std::move(views.first), model.encoder.max_len));
    second.push_back(clip(std::move(views.second), model.encoder.max_len));
    labels.push_back(batch[i].label);
    labels.push_back(batch[i].label);
  }
  Tape tape;
  const std::size_t begin = model.gcl_first_layer();
  auto compress = [&](const std::vector<std::vector<int>>& seqs, std::uint64_t view) {
    auto enc = encode(tape, model.params, model.encoder, pad_batch(seqs, model.encoder), true,
                      derive_seed({step_seed, view}));
    auto pooled = pool_layers(enc);
    std::vector<Var> routed(pooled.begin() + static_cast<std::ptrdiff_t>(begin), pooled.end());
    return gcl_compress(tape, model.params, model.gcl, routed).ensemble;
  };
  Var z1 = compress(first, 1);
  Var z2 = compress(second, 2);
  Var c = ops::interleave_rows(z1, z2);
  Var scl = ops::scl_loss(ops::normalize_rows(c), labels, cfg.tau);
  Var cr = ops::cr_loss(c, model.gcl.layers, cfg.margin);
  Var total = ops::total_loss(scl, cr, cfg.lambda1);
  StepLosses out{total.value().item(), scl.value().item(), cr.value().item(),
                 mean_adjacent_correlation(c.value(), model.gcl.layers)};
  if (!std::isfinite(out.total)) return out;
  tape.backward(total);
  return out;
}

inline StepLosses ce_step(Model& model, const TrainConfig& /*cfg*/, const std::vector<LabeledExample>& batch,
                          std::uint64_t step_seed) {
  std::vector<std::vector<int>> seqs;
  std::vector<int> labels;
  for (const auto& ex : batch) {
    seqs.push_back(model.tokens(ex));
    labels.push_back(ex.label);
  }
  Tape tape;
  auto enc = encode(tape, model.params, model.encoder, pad_batch(seqs, model.encoder), true,
                    derive_seed({step_seed, 1}));
  auto pooled = pool_layers(enc);
  Var logits = ops::linear(pooled.back(), tape.param(param_at(model.params, "head.w")),
                           tape.param(param_at(model.params, "head.b")));
  Var loss = ops::softmax_cross_entropy(logits, labels);
  StepLosses out{loss.value().item(), 0.0, 0.0,
                 mean_adjacent_correlation(concat_columns(pooled), model.encoder.layers)};
  if (!std::isfinite(out.total)) return out;
  tape.backward(loss);
  return out;
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochRecord&)>;

// Fixed-epoch training on the IND corpus's train split. The vocabulary is
// built from that split. Validation data is not consulted.
inline TrainResult train(const Corpus& ind, EncoderConfig enc, const TrainConfig& cfg,
                         const ParaphraseSidecar* sidecar = nullptr, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (ind.train.empty()) throw Error("empty-split", "train");
  Vocabulary vocab = Vocabulary::build(ind.train, cfg.min_freq);
  TrainResult res{init_model(enc, cfg.model, std::move(vocab), ind.label_names, cfg.seed), {}};
  Model& model = res.model;
  res.report.config = train_config_to_json(cfg, model.encoder);

  std::vector<LabeledExample> examples = ind.train;
  for (auto& ex : examples) ex.tokens = model.tokens(ex);

  AdamWConfig opt;
  opt.weight_decay = cfg.weight_decay;
  AdamWState state;
  const std::size_t per_epoch = (examples.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = per_epoch * cfg.epochs;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_at(step, total_steps, cfg.lr_peak);
    const auto batches = batch_iter(examples.size(), cfg.batch_size, cfg.seed, epoch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<LabeledExample> batch;
      for (std::size_t idx : batches[b]) batch.push_back(examples[idx]);
      zero_grads(model.params);
      const std::uint64_t step_seed = derive_seed({cfg.seed, epoch, b});
      const auto losses = model.is_lacl() ? detail::lacl_step(model, cfg, batch, sidecar, step_seed)
                                          : detail::ce_step(model, cfg, batch, step_seed);
      if (!std::isfinite(losses.total))
        throw Error("non-finite-loss", "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      adamw_step(model.params, state, lr_at(step, total_steps, cfg.lr_peak), opt);
      ++step;
      rec.loss_total += losses.total;
      rec.loss_scl += losses.scl;
      rec.loss_cr += losses.cr;
      rec.mean_adj_cor += losses.mean_adj_cor;
    }
    const double nb = static_cast<double>(batches.size());
    rec.loss_total /= nb;
    rec.loss_scl /= nb;
    rec.loss_cr /= nb;
    rec.mean_adj_cor /= nb;
    res.report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  zero_grads(model.params);
  return res;
}

}  // namespace lacl
