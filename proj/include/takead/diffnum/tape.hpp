#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "takead/diffnum/tensor.hpp"

namespace takead::diffnum {

struct Parameter {
  std::string name;
  std::string group;
  Tensor value;
};

// Named trainable tensors. Indices are stable for the lifetime of the set.
class ParameterSet {
 public:
  std::size_t add(std::string name, std::string group, Tensor init) {
    if (by_name_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    by_name_.emplace(name, params_.size());
    params_.push_back({std::move(name), std::move(group), std::move(init)});
    return params_.size() - 1;
  }

  std::size_t index(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

// One gradient tensor per parameter, same shapes as the values.
using Gradients = std::vector<Tensor>;

inline Gradients zero_gradients(const ParameterSet& ps) {
  Gradients g;
  g.reserve(ps.size());
  for (const auto& p : ps) g.emplace_back(p.value.shape(), 0.0);
  return g;
}

// Accumulates b into a (same shapes). Fixed element order.
inline void accumulate(Gradients& a, const Gradients& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
}

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape;
using Backprop = std::function<void(Tape&, int self)>;

// Records primitive ops in execution order. backward() replays them in exact
// reverse order and returns parameter gradients; the tape itself holds no
// parameter state, so tapes over the same ParameterSet are independent.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor t) {
    Node n;
    n.own = std::move(t);
    return push_node(std::move(n));
  }

  // Leaf bound to a parameter. Repeated calls with the same index on the same
  // tape return the same node so that gradients sum in one buffer.
  Var param(const ParameterSet& ps, std::size_t index) {
    if (params_ && params_ != &ps)
      throw std::invalid_argument("tape already bound to a different parameter set");
    params_ = &ps;
    auto it = param_nodes_.find(index);
    if (it != param_nodes_.end()) return Var{it->second};
    Node n;
    n.ext = &ps[index].value;
    n.param_index = static_cast<int>(index);
    n.requires_grad = true;
    Var v = push_node(std::move(n));
    param_nodes_.emplace(index, v.id);
    return v;
  }

  Var param(const ParameterSet& ps, const std::string& name) { return param(ps, ps.index(name)); }

  const Tensor& value(Var v) const { return nodes_.at(check(v)).get(); }
  bool requires_grad(Var v) const { return nodes_.at(check(v)).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Result of an op. requires_grad is inherited from the inputs.
  Var record(Tensor value, const std::vector<Var>& inputs, Backprop fn) {
    Node n;
    n.own = std::move(value);
    for (Var in : inputs) {
      check(in);
      if (nodes_[in.id].requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backprop = std::move(fn);
    return push_node(std::move(n));
  }

  // Gradient of node `self` during replay.
  const Tensor& grad(int self) const { return nodes_[self].grad; }

  // Accumulation buffer for an input, or nullptr if it needs no gradient.
  Tensor* grad_sink(Var in) {
    Node& n = nodes_[in.id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad = Tensor(n.get().shape(), 0.0);
    return &n.grad;
  }

  Gradients backward(Var loss) {
    const Tensor& lv = value(loss);
    if (lv.shape() != Shape{1})
      throw ShapeError("backward: loss must have shape [1], got " + shape_str(lv.shape()));
    for (auto& n : nodes_) n.grad = Tensor();
    Gradients out;
    if (params_) out = zero_gradients(*params_);
    if (!nodes_[loss.id].requires_grad) return out;
    nodes_[loss.id].grad = Tensor::vector({1.0});
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.grad.empty()) continue;
      if (n.backprop) n.backprop(*this, i);
      if (n.param_index >= 0) {
        Tensor& dst = out[static_cast<std::size_t>(n.param_index)];
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += n.grad[j];
      }
    }
    return out;
  }

 private:
  struct Node {
    Tensor own;
    const Tensor* ext = nullptr;
    Tensor grad;
    Backprop backprop;
    int param_index = -1;
    bool requires_grad = false;
    const Tensor& get() const { return ext ? *ext : own; }
  };

  int check(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
      throw std::out_of_range("var does not belong to this tape");
    return v.id;
  }

  Var push_node(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
  const ParameterSet* params_ = nullptr;
  std::unordered_map<std::size_t, int> param_nodes_;
};

}  // namespace takead::diffnum
