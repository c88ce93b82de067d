#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lacl/encoder/encoder.hpp"
#include "lacl/head/gcl.hpp"
#include "lacl/head/losses.hpp"
#include "lacl/numcore/gradcheck.hpp"
#include "lacl/numcore/ops.hpp"
#include "lacl/numcore/random.hpp"
#include "lacl/numcore/tape.hpp"

namespace lacl::diagnostics {

struct CheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t trials = 0;
  std::size_t skipped = 0;  // trials discarded near a non-differentiable point
};

// Builds a scalar from the op's inputs on a tape.
using OpBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = scale * rng.normal();
  return t;
}

// Non-scalar outputs are reduced with fixed random weights, sum(y * r), so
// every output entry contributes to the check.
inline Var reduce_random(Var y, Rng& rng) {
  if (y.value().size() == 1) return y;
  Var r = y.tape()->constant(random_tensor(y.value().shape(), rng));
  return ops::sum(ops::mul(y, r));
}

// Relative error between backward() and central differences for all inputs.
inline double check_op(const OpBuilder& build, const std::vector<Tensor>& inputs, std::uint64_t seed,
                       double h = 1e-5) {
  const std::uint64_t reduce_seed = derive_seed({seed, 0x726564});
  std::vector<double> flat;
  for (const auto& t : inputs) flat.insert(flat.end(), t.storage().begin(), t.storage().end());

  auto unflatten = [&](std::span<const double> x) {
    std::vector<Tensor> out;
    std::size_t off = 0;
    for (const auto& t : inputs) {
      out.emplace_back(t.shape(), std::vector<double>(x.begin() + off, x.begin() + off + t.size()));
      off += t.size();
    }
    return out;
  };
  auto objective = [&](std::span<const double> x) {
    Tape tape(false);
    std::vector<Var> vars;
    for (auto& t : unflatten(x)) vars.push_back(tape.constant(std::move(t)));
    Rng rng(reduce_seed);
    return reduce_random(build(tape, vars), rng).value().item();
  };

  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.input(t));
  Rng rng(reduce_seed);
  Var loss = reduce_random(build(tape, vars), rng);
  tape.backward(loss);
  std::vector<double> analytic;
  for (const auto& v : vars) {
    const Tensor& g = v.grad();
    if (g.empty()) analytic.insert(analytic.end(), v.value().size(), 0.0);
    else analytic.insert(analytic.end(), g.storage().begin(), g.storage().end());
  }
  const auto numeric = finite_diff_gradient(objective, flat, h);
  return relative_error(analytic, numeric);
}

// ---------------------------------------------------------------------------
// Full LaCL objective through encoder, GCL, SCL and CR.
// ---------------------------------------------------------------------------

struct ObjectiveSetup {
  EncoderConfig encoder;
  GclConfig gcl;
  double tau = 0.05;
  double lambda1 = 1.0;
  double margin = 0.5;
  std::size_t batch = 4;    // examples; the loss sees 2 * batch views
  std::size_t classes = 2;
  std::size_t max_coords = 0;  // 0 = every parameter coordinate
};

inline ObjectiveSetup small_objective() {
  ObjectiveSetup s;
  s.encoder.layers = 2;
  s.encoder.hidden = 8;
  s.encoder.heads = 2;
  s.encoder.ff_mult = 2;
  s.encoder.dropout = 0.0;
  s.encoder.max_len = 6;
  s.encoder.vocab_size = 12;
  s.gcl.input_dim = 8;
  s.gcl.hidden = 16;
  s.gcl.output_dim = 4;
  s.gcl.layers = 2;
  return s;
}

struct ObjectiveTrial {
  double rel_error = 0.0;
  bool near_margin = false;  // some |cor - m| < 1e-6: indicator not differentiable
};

// One random batch and initialization: views are interleaved rows of two
// token sequences per example; dropout is off so the objective is a fixed
// function of the parameters.
inline ObjectiveTrial check_objective(const ObjectiveSetup& s, std::uint64_t seed, double h = 1e-5) {
  Rng rng(seed);
  ParamStore params;
  init_encoder(params, s.encoder, rng);
  init_gcl(params, s.gcl, rng);
  std::vector<std::vector<int>> v1, v2;
  std::vector<int> labels;
  for (std::size_t b = 0; b < s.batch; ++b) {
    auto seq = [&] {
      std::vector<int> ids(1 + rng.index(s.encoder.max_len));
      for (int& id : ids) id = 3 + static_cast<int>(rng.index(s.encoder.vocab_size - 3));
      return ids;
    };
    v1.push_back(seq());
    v2.push_back(seq());
    const int y = static_cast<int>(b < s.classes ? b : rng.index(s.classes));
    labels.push_back(y);
    labels.push_back(y);
  }

  auto build = [&](Tape& tape, ParamStore& store, bool frozen) {
    auto z_of = [&](const std::vector<std::vector<int>>& seqs) {
      auto enc = frozen ? encode(tape, std::as_const(store), s.encoder, pad_batch(seqs, s.encoder), false, 0)
                        : encode(tape, store, s.encoder, pad_batch(seqs, s.encoder), false, 0);
      auto pooled = pool_layers(enc);
      return frozen ? gcl_compress(tape, std::as_const(store), s.gcl, pooled).ensemble
                    : gcl_compress(tape, store, s.gcl, pooled).ensemble;
    };
    Var c = ops::interleave_rows(z_of(v1), z_of(v2));
    Var scl = ops::scl_loss(ops::normalize_rows(c), labels, s.tau);
    Var cr = ops::cr_loss(c, s.gcl.layers, s.margin);
    return std::make_pair(ops::total_loss(scl, cr, s.lambda1), c);
  };

  ObjectiveTrial trial;
  Tape tape;
  auto [loss, c] = build(tape, params, false);
  const std::size_t width = s.gcl.output_dim;
  for (std::size_t l = 0; l + 1 < s.gcl.layers; ++l)
    for (std::size_t d = 0; d < width; ++d)
      if (std::abs(adjacent_correlation(c.value(), s.gcl.layers, l, d) - s.margin) < 1e-6) trial.near_margin = true;
  tape.backward(loss);

  std::vector<Parameter*> order;
  std::vector<double> flat, analytic;
  for (auto& [name, p] : params) {
    order.push_back(&p);
    flat.insert(flat.end(), p.value.storage().begin(), p.value.storage().end());
    analytic.insert(analytic.end(), p.grad.storage().begin(), p.grad.storage().end());
  }
  std::vector<std::size_t> coords;
  if (s.max_coords && s.max_coords < flat.size()) {
    std::vector<std::size_t> all(flat.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    rng.shuffle(all.begin(), all.end());
    coords.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(s.max_coords));
    std::sort(coords.begin(), coords.end());
  }
  ParamStore probe = params;
  auto objective = [&](std::span<const double> x) {
    std::size_t off = 0;
    for (auto& [name, p] : probe) {
      std::copy(x.begin() + off, x.begin() + off + p.value.size(), p.value.storage().begin());
      off += p.value.size();
    }
    Tape t(false);
    return build(t, probe, true).first.value().item();
  };
  const auto numeric = finite_diff_gradient(objective, flat, h, coords);
  if (!coords.empty()) {
    std::vector<double> a, n;
    for (auto i : coords) {
      a.push_back(analytic[i]);
      n.push_back(numeric[i]);
    }
    trial.rel_error = relative_error(a, n);
  } else {
    trial.rel_error = relative_error(analytic, numeric);
  }
  return trial;
}

inline CheckResult check_objective_many(const ObjectiveSetup& s, std::size_t trials, std::uint64_t seed) {
  CheckResult r{"lacl_objective", 0.0, 0, 0};
  for (std::size_t t = 0; t < trials; ++t) {
    const auto trial = check_objective(s, derive_seed({seed, t}));
    if (trial.near_margin) {
      ++r.skipped;
      continue;
    }
    ++r.trials;
    r.max_rel_error = std::max(r.max_rel_error, trial.rel_error);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Per-op suite.
// ---------------------------------------------------------------------------

inline std::vector<CheckResult> check_all_ops(std::size_t trials, std::uint64_t seed) {
  struct Case {
    std::string name;
    std::function<std::pair<OpBuilder, std::vector<Tensor>>(Rng&)> make;
  };
  std::vector<Case> cases;
  cases.push_back({"linear", [](Rng& r) {
                     return std::make_pair(
                         OpBuilder([](Tape&, const std::vector<Var>& v) { return ops::linear(v[0], v[1], v[2]); }),
                         std::vector<Tensor>{random_tensor({3, 4}, r), random_tensor({4, 5}, r), random_tensor({5}, r)});
                   }});
  cases.push_back({"add", [](Rng& r) {
                     return std::make_pair(
                         OpBuilder([](Tape&, const std::vector<Var>& v) { return ops::add(v[0], v[1]); }),
                         std::vector<Tensor>{random_tensor({3, 4}, r), random_tensor({3, 4}, r)});
                   }});
  cases.push_back({"mul", [](Rng& r) {
                     return std::make_pair(
                         OpBuilder([](Tape&, const std::vector<Var>& v) { return ops::mul(v[0], v[1]); }),
                         std::vector<Tensor>{random_tensor({3, 4}, r), random_tensor({3, 4}, r)});
                   }});
  cases.push_back({"scale", [](Rng& r) {
                     return std::make_pair(
                         OpBuilder([](Tape&, const std::vector<Var>& v) { return ops::scale(v[0], -1.7); }),
                         std::vector<Tensor>{random_tensor({4, 4}, r)});
                   }});
  cases.push_back({"sum", [](Rng& r) {
                     return std::make_pair(OpBuilder([](Tape&, const std::vector<Var>& v) { return ops::sum(v[0]); }),
                                           std::vector<Tensor>{random_tensor({5, 3}, r)});
                   }});
  cases.push_back({"gelu", [](Rng& r) {
                     return std::make_pair(OpBuilder([](Tape&, const std::vector<Var>& v) { return ops::gelu(v[0]); }),
                                           std::vector<Tensor>{random_tensor({4, 5}, r, 2.0)});
                   }});
  cases.push_back({"tanh", [](Rng& r) {
                     return std::make_pair(OpBuilder([](Tape&, const std::vector<Var>& v) { return ops::tanh(v[0]); }),
                                           std::vector<Tensor>{random_tensor({4, 5}, r)});
                   }});
  cases.push_back({"layer_norm", [](Rng& r) {
                     return std::make_pair(
                         OpBuilder([](Tape&, const std::vector<Var>& v) { return ops::layer_norm(v[0], v[1], v[2]); }),
                         std::vector<Tensor>{random_tensor({3, 6}, r), random_tensor({6}, r), random_tensor({6}, r)});
                   }});
  cases.push_back({"attention", [](Rng& r) {
                     // batch 2, len 3, 2 heads of width 2; the last key of sequence 1 is PAD.
                     std::vector<bool> mask = {true, true, true, true, true, false};
                     return std::make_pair(OpBuilder([mask](Tape&, const std::vector<Var>& v) {
                                             return ops::attention(v[0], v[1], v[2], 2, 3, 2, mask);
                                           }),
                                           std::vector<Tensor>{random_tensor({6, 4}, r), random_tensor({6, 4}, r),
                                                               random_tensor({6, 4}, r)});
                   }});
  cases.push_back({"gather_rows", [](Rng& r) {
                     return std::make_pair(OpBuilder([](Tape&, const std::vector<Var>& v) {
                                             return ops::gather_rows(v[0], {2, 0, 2, 1});
                                           }),
                                           std::vector<Tensor>{random_tensor({4, 3}, r)});
                   }});
  cases.push_back({"masked_mean_pool", [](Rng& r) {
                     std::vector<bool> mask = {true, true, false, true, false, false};
                     return std::make_pair(OpBuilder([mask](Tape&, const std::vector<Var>& v) {
                                             return ops::masked_mean_pool(v[0], 2, 3, mask);
                                           }),
                                           std::vector<Tensor>{random_tensor({6, 4}, r)});
                   }});
  cases.push_back({"concat_cols", [](Rng& r) {
                     return std::make_pair(OpBuilder([](Tape&, const std::vector<Var>& v) {
                                             return ops::concat_cols({v[0], v[1]});
                                           }),
                                           std::vector<Tensor>{random_tensor({3, 2}, r), random_tensor({3, 4}, r)});
                   }});
  cases.push_back({"slice_cols", [](Rng& r) {
                     return std::make_pair(
                         OpBuilder([](Tape&, const std::vector<Var>& v) { return ops::slice_cols(v[0], 1, 3); }),
                         std::vector<Tensor>{random_tensor({3, 5}, r)});
                   }});
  cases.push_back({"interleave_rows", [](Rng& r) {
                     return std::make_pair(
                         OpBuilder([](Tape&, const std::vector<Var>& v) { return ops::interleave_rows(v[0], v[1]); }),
                         std::vector<Tensor>{random_tensor({3, 4}, r), random_tensor({3, 4}, r)});
                   }});
  cases.push_back({"normalize_rows", [](Rng& r) {
                     return std::make_pair(
                         OpBuilder([](Tape&, const std::vector<Var>& v) { return ops::normalize_rows(v[0]); }),
                         std::vector<Tensor>{random_tensor({4, 3}, r)});
                   }});
  cases.push_back({"scl_loss", [](Rng& r) {
                     return std::make_pair(OpBuilder([](Tape&, const std::vector<Var>& v) {
                                             return ops::scl_loss(ops::normalize_rows(v[0]), {0, 0, 1, 1, 0, 0}, 0.5);
                                           }),
                                           std::vector<Tensor>{random_tensor({6, 4}, r)});
                   }});
  cases.push_back({"cr_loss", [](Rng& r) {
                     return std::make_pair(
                         OpBuilder([](Tape&, const std::vector<Var>& v) { return ops::cr_loss(v[0], 3, 0.05); }),
                         std::vector<Tensor>{random_tensor({6, 6}, r)});
                   }});
  cases.push_back({"softmax_cross_entropy", [](Rng& r) {
                     return std::make_pair(OpBuilder([](Tape&, const std::vector<Var>& v) {
                                             return ops::softmax_cross_entropy(v[0], {0, 2, 1});
                                           }),
                                           std::vector<Tensor>{random_tensor({3, 3}, r)});
                   }});

  std::vector<CheckResult> out;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    CheckResult res{cases[c].name, 0.0, 0, 0};
    for (std::size_t t = 0; t < trials; ++t) {
      Rng rng(derive_seed({seed, c, t}));
      auto [builder, inputs] = cases[c].make(rng);
      res.max_rel_error = std::max(res.max_rel_error, check_op(builder, inputs, derive_seed({seed, c, t, 1})));
      ++res.trials;
    }
    out.push_back(res);
  }
  return out;
}

}  // namespace lacl::diagnostics
