#pragma once

#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "csifuse/error.hpp"
#include "csifuse/nn/param.hpp"

namespace csifuse::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Records a forward computation as a list of values plus one backward
/// closure per differentiable op. Single use: backward() may run once.
///
/// Gradients of parameters are accumulated into Param::grad, so callers
/// zero them between optimisation steps. With gradients disabled the tape
/// stores values only and records no closures.
template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  bool consumed() const { return consumed_; }

  /// A value that never receives a gradient.
  Var constant(Mat value) { return push(std::move(value), false); }

  /// A value whose gradient is kept on the tape (readable after backward).
  Var input(Mat value) { return push(std::move(value), grad_enabled_); }

  /// Binds a parameter by reference; its gradient accumulates into p.grad.
  Var param(Param<Scalar>& p) {
    Node n;
    n.param = &p;
    n.requires_grad = grad_enabled_;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Mat& value(Var v) const {
    const Node& n = node(v);
    return n.param != nullptr ? n.param->value : n.value;
  }

  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Gradient of a non-parameter node; empty until something flows into it.
  const Mat& grad(Var v) const {
    const Node& n = node(v);
    return n.param != nullptr ? n.param->grad : n.grad;
  }

  /// Adds `delta` into the gradient of `v` (no-op for constants).
  template <typename Expr>
  void accumulate(Var v, const Expr& delta) {
    Node& n = node(v);
    if (!n.requires_grad) return;
    if (n.param != nullptr) {
      if (n.param->grad.size() == 0) n.param->zero_grad();
      n.param->grad += delta;
    } else if (n.grad.size() == 0) {
      n.grad = delta;
    } else {
      n.grad += delta;
    }
  }

  /// Records an op output. `backward(dy, y)` runs only if the output needs a
  /// gradient.
  Var record(Mat value, bool requires_grad, std::function<void(const Mat& out_grad, const Mat& out_value)> backward) {
    const bool track = grad_enabled_ && requires_grad;
    Var out = push(std::move(value), track);
    if (track) {
      closures_.push_back({out.id, std::move(backward)});
    }
    return out;
  }

  template <typename... Vs>
  bool any_requires_grad(Vs... vs) const {
    return (requires_grad(vs) || ...);
  }

  /// Reverse sweep from a scalar (1x1) loss.
  void backward(Var loss) {
    if (consumed_) throw TapeError("backward: tape already consumed");
    if (!grad_enabled_) throw TapeError("backward: tape was recorded without gradients");
    const Mat& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) throw ShapeError("backward: loss must be a 1x1 scalar");
    consumed_ = true;
    if (!requires_grad(loss)) return;
    accumulate(loss, Mat::Ones(1, 1));
    for (auto it = closures_.rbegin(); it != closures_.rend(); ++it) {
      const Node& n = nodes_[static_cast<std::size_t>(it->output)];
      if (n.grad.size() == 0) continue;
      it->fn(n.grad, n.value);
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Param<Scalar>* param = nullptr;
    bool requires_grad = false;
  };
  struct Closure {
    int output;
    std::function<void(const Mat&, const Mat&)> fn;
  };

  Var push(Mat value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  Node& node(Var v) {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) throw TapeError("invalid tape variable");
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  const Node& node(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) throw TapeError("invalid tape variable");
    return nodes_[static_cast<std::size_t>(v.id)];
  }

  std::deque<Node> nodes_;
  std::vector<Closure> closures_;
  bool grad_enabled_;
  bool consumed_ = false;
};

}  // namespace csifuse::nn
