#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lacl/numcore/error.hpp"
#include "lacl/numcore/tensor.hpp"

namespace lacl {

// A trainable tensor and its accumulated gradient.
struct Parameter {
  Tensor value;
  Tensor grad;

  void zero_grad() { grad = Tensor::zeros_like(value); }
};

// Named parameters; std::map keeps iteration (and therefore checkpoints and
// optimizer updates) in a stable order.
using ParamStore = std::map<std::string, Parameter>;

inline Parameter& param_at(ParamStore& store, const std::string& name) {
  auto it = store.find(name);
  if (it == store.end()) throw Error("missing-parameter", name);
  return it->second;
}

inline const Parameter& param_at(const ParamStore& store, const std::string& name) {
  auto it = store.find(name);
  if (it == store.end()) throw Error("missing-parameter", name);
  return it->second;
}

enum class OpKind {
  Constant,
  Input,
  Param,
  Linear,
  Add,
  Mul,
  Scale,
  Sum,
  Gelu,
  Tanh,
  LayerNorm,
  Attention,
  Gather,
  Dropout,
  MaskedMeanPool,
  ConcatCols,
  SliceCols,
  InterleaveRows,
  NormalizeRows,
  SclLoss,
  CrLoss,
  SoftmaxCrossEntropy,
};

inline std::string_view op_name(OpKind k) {
  switch (k) {
    case OpKind::Constant: return "constant";
    case OpKind::Input: return "input";
    case OpKind::Param: return "param";
    case OpKind::Linear: return "linear";
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Sum: return "sum";
    case OpKind::Gelu: return "gelu";
    case OpKind::Tanh: return "tanh";
    case OpKind::LayerNorm: return "layer_norm";
    case OpKind::Attention: return "attention";
    case OpKind::Gather: return "gather";
    case OpKind::Dropout: return "dropout";
    case OpKind::MaskedMeanPool: return "masked_mean_pool";
    case OpKind::ConcatCols: return "concat_cols";
    case OpKind::SliceCols: return "slice_cols";
    case OpKind::InterleaveRows: return "interleave_rows";
    case OpKind::NormalizeRows: return "normalize_rows";
    case OpKind::SclLoss: return "scl_loss";
    case OpKind::CrLoss: return "cr_loss";
    case OpKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
  }
  return "unknown";
}

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records a computation as an append-only list of nodes. Parents always precede
// children, so the node list is already a topological order and backward()
// simply walks it in reverse, visiting each node once.
class Tape {
 public:
  // The backward function receives the node's output gradient and pushes
  // contributions into parents through accumulate().
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  // With grad disabled the tape stores values only; used for inference.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const noexcept { return grad_enabled_; }

  Var constant(Tensor value) { return push(OpKind::Constant, std::move(value), {}, false, {}); }

  // Differentiable leaf whose gradient is read back via Var::grad().
  Var input(Tensor value) { return push(OpKind::Input, std::move(value), {}, grad_enabled_, {}); }

  // Leaf bound to a Parameter; backward() adds into Parameter::grad.
  Var param(Parameter& p) {
    Var v = push(OpKind::Param, p.value, {}, grad_enabled_, {});
    if (grad_enabled_) nodes_.back().sink = &p;
    return v;
  }

  // Frozen parameter: recorded by value, never receives gradient.
  Var param(const Parameter& p) { return push(OpKind::Param, p.value, {}, false, {}); }

  Var record(OpKind kind, Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
    bool needs = false;
    std::vector<std::size_t> ids;
    ids.reserve(parents.size());
    for (const Var& p : parents) {
      ids.push_back(p.id());
      needs = needs || nodes_[p.id()].requires_grad;
    }
    needs = needs && grad_enabled_;
    return push(kind, std::move(value), std::move(ids), needs, needs ? std::move(fn) : BackwardFn{});
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  const Tensor& grad(std::size_t id) const { return nodes_.at(id).grad; }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_.at(id).parents; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Adds g into the gradient of node id (allocating it on first use).
  void accumulate(std::size_t id, const Tensor& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
    n.grad += g;
  }

  // Mutable access for backward functions that scatter sparsely.
  Tensor* grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
    return &n.grad;
  }

  void backward(Var loss) {
    if (backward_done_) throw Error("backward-already-run", "reset the tape before calling backward again");
    if (loss.tape() != this) throw Error("foreign-node");
    const Node& root = nodes_.at(loss.id());
    if (root.value.size() != 1) {
      throw Error("non-scalar-loss", "loss has shape " + shape_string(root.value.shape()));
    }
    backward_done_ = true;
    if (!root.requires_grad) return;
    nodes_[loss.id()].grad = Tensor(root.value.shape(), 1.0);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.sink) {
        if (n.sink->grad.size() != n.grad.size()) n.sink->zero_grad();
        n.sink->grad += n.grad;
      }
      if (n.backward) n.backward(*this, n.grad);
    }
  }

  void reset() {
    nodes_.clear();
    backward_done_ = false;
  }

 private:
  struct Node {
    OpKind kind;
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* sink = nullptr;
  };

  Var push(OpKind kind, Tensor value, std::vector<std::size_t> parents, bool requires_grad,
           BackwardFn fn) {
    nodes_.push_back(Node{kind, std::move(value), Tensor{}, std::move(parents), requires_grad,
                          std::move(fn), nullptr});
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  bool grad_enabled_;
  bool backward_done_ = false;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline const Tensor& Var::grad() const { return tape_->grad(id_); }

}  // namespace lacl
