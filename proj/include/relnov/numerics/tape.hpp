#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "relnov/numerics/tensor.hpp"

namespace relnov {

template <typename T>
class Tape;

// Handle to a value recorded on a tape. Cheap to copy; only valid while the
// owning tape is alive.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Records primitive operations in execution order. Node ids grow
// monotonically, so reverse id order is a valid reverse topological order and
// backward visits each node once.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    std::vector<std::size_t> inputs;

    const Tensor<T>& get() const { return external ? *external : value; }
    std::vector<T> grad;
    bool needs_grad = false;
    Tensor<T>* leaf = nullptr;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers an external tensor without copying it. Gradients reach
  // `param.grad()` only when the tensor has requires_grad set. The tensor must
  // outlive the tape and stay unmodified while the tape is in use.
  Var<T> leaf(Tensor<T>& param) {
    Node node;
    node.external = &param;
    node.needs_grad = param.requires_grad();
    node.leaf = param.requires_grad() ? &param : nullptr;
    return push(std::move(node));
  }

  // Read-only registration; never receives gradients.
  Var<T> leaf(const Tensor<T>& value) {
    Node node;
    node.external = &value;
    return push(std::move(node));
  }

  Var<T> constant(Tensor<T> value) {
    Node node;
    node.value = std::move(value);
    return push(std::move(node));
  }

  // Appends the result of a primitive. `backward` is dropped when no input
  // needs a gradient, so inference-only graphs carry no closures.
  Var<T> record(Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    for (std::size_t in : inputs) node.needs_grad = node.needs_grad || nodes_.at(in).needs_grad;
    node.inputs = std::move(inputs);
    if (node.needs_grad) node.backward = std::move(backward);
    return push(std::move(node));
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).get(); }
  bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradient buffer of a node, allocated on first touch.
  std::vector<T>& grad(std::size_t id) {
    Node& node = nodes_.at(id);
    const std::size_t n = node.get().size();
    if (node.grad.size() != n) node.grad.assign(n, T{0});
    return node.grad;
  }

  // Seeds dLoss/dLoss = 1 and propagates. Leaf gradients are added to the
  // registered tensors, so repeated calls accumulate.
  void backward(Var<T> loss) {
    if (loss.tape != this) throw ContractError("backward: loss recorded on a different tape");
    const Tensor<T>& out = value(loss.id);
    if (out.size() != 1) {
      throw ContractError("backward: loss must be scalar, got shape " + shape_str(out.shape()));
    }
    for (Node& node : nodes_) node.grad.clear();
    grad(loss.id)[0] = T{1};
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      Node& node = nodes_[id];
      if (!node.needs_grad || node.grad.empty()) continue;
      if (node.backward) node.backward(*this, id);
      if (node.leaf != nullptr) {
        auto dst = node.leaf->grad();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += node.grad[i];
      }
    }
  }

 private:
  Var<T> push(Node node) {
    nodes_.push_back(std::move(node));
    return Var<T>{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace relnov
