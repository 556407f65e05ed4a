// Reverse-mode computation tape.
//
// Nodes are appended in evaluation order; backward() walks them in reverse
// and calls each node's local backward closure with the accumulated output
// gradient. Parameter leaves route their gradient into Tensor::grad.
//
// A tape and everything recorded on it belongs to one thread.

#pragma once

#include "smaug/numerics/tensor.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace smaug {

template <typename T>
class Tape;

template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

  const Matrix<T>& value() const { return tape_->value(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  T scalar() const { return value()(0, 0); }

  Tape<T>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix<T>&)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Matrix<T> v) { return push(std::move(v), false, nullptr, {}); }

  Var<T> parameter(Tensor<T>& p) { return push(p.value, true, &p, {}); }

  /// Records an op result. The node needs a gradient when any input does.
  Var<T> record(Matrix<T> value, std::initializer_list<int> inputs, BackwardFn fn) {
    return record(std::move(value), std::vector<int>(inputs), std::move(fn));
  }

  Var<T> record(Matrix<T> value, const std::vector<int>& inputs, BackwardFn fn) {
    bool needs = false;
    for (int i : inputs) needs = needs || nodes_[static_cast<std::size_t>(i)].needs_grad;
    return push(std::move(value), needs, nullptr, needs ? std::move(fn) : BackwardFn{});
  }

  const Matrix<T>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  /// Gradient buffer of a node, zero-initialized on first access.
  Matrix<T>& grad(int id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = Matrix<T>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  void backward(const Var<T>& loss) {
    if (loss.tape() != this) throw ArgumentError("backward: loss recorded on another tape");
    const auto& lv = value(loss.id());
    if (lv.rows() != 1 || lv.cols() != 1)
      throw ArgumentError("backward: loss must be a scalar, got " + dims_string(lv));
    if (!needs_grad(loss.id())) return;
    grad(loss.id())(0, 0) += T(1);
    for (int id = loss.id(); id >= 0; --id) {
      auto& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      if (n.param) {
        n.param->grad += n.grad;
      } else if (n.backward) {
        // the closure may grow other nodes' grads but never this vector
        Matrix<T> g = std::move(n.grad);
        n.backward(*this, g);
      }
      n.grad.resize(0, 0);
    }
  }

 private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    bool needs_grad = false;
    Tensor<T>* param = nullptr;
    BackwardFn backward;
  };

  Var<T> push(Matrix<T> v, bool needs, Tensor<T>* param, BackwardFn fn) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs;
    n.param = param;
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
};

}  // namespace smaug
