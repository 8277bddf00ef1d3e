#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "csifuse/nn/ops.hpp"

// Tape-free single-vector forms of the model primitives.

namespace csifuse::nn {

template <typename Scalar>
struct LayerNormParams {
  Param<Scalar> gamma;
  Param<Scalar> beta;
  Scalar epsilon = Scalar(1e-5);

  LayerNormParams() = default;
  LayerNormParams(const std::string& prefix, Eigen::Index width, Scalar eps = Scalar(1e-5))
      : gamma(Param<Scalar>::vector(prefix + ".gamma", width)),
        beta(Param<Scalar>::vector(prefix + ".beta", width)),
        epsilon(eps) {
    gamma.value.setOnes();
  }

  void collect(ParamRefs<Scalar>& out) {
    out.push_back(&beta);
    out.push_back(&gamma);
  }
};

/// gamma * (x - mean) / sqrt(var + eps) + beta with population variance.
template <typename Scalar>
Vector<Scalar> layer_norm(const LayerNormParams<Scalar>& p, const Vector<Scalar>& x) {
  if (x.size() != p.gamma.value.rows() || x.size() != p.beta.value.rows()) {
    throw ShapeError("layer_norm: input length " + std::to_string(x.size()) + " vs parameters " +
                     std::to_string(p.gamma.value.rows()));
  }
  const Scalar mean = x.mean();
  const Scalar var = (x.array() - mean).square().mean();
  return (p.gamma.value.col(0).array() * (x.array() - mean) / std::sqrt(var + p.epsilon) +
          p.beta.value.col(0).array())
      .matrix();
}

/// Gate and fused vector: g = sigmoid(Wg [uA; uP] + bg), z = g*uA + (1-g)*uP.
template <typename Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> gated_fuse(const Matrix<Scalar>& w_gate, const Vector<Scalar>& b_gate,
                                                     const Vector<Scalar>& u_amp, const Vector<Scalar>& u_phase) {
  const Eigen::Index h = u_amp.size();
  if (u_phase.size() != h || w_gate.rows() != h || w_gate.cols() != 2 * h || b_gate.size() != h) {
    throw ShapeError("gated_fuse: expected Wg " + std::to_string(h) + "x" + std::to_string(2 * h) + ", bg[" +
                     std::to_string(h) + "]");
  }
  Vector<Scalar> joined(2 * h);
  joined << u_amp, u_phase;
  Vector<Scalar> g = detail::sigmoid((w_gate * joined + b_gate).array()).matrix();
  Vector<Scalar> z = (g.array() * u_amp.array() + (Scalar(1) - g.array()) * u_phase.array()).matrix();
  return {std::move(z), std::move(g)};
}

/// Numerically stable softmax (max subtracted) and -log p_y.
template <typename Scalar>
std::pair<Scalar, Vector<Scalar>> softmax_cross_entropy(const Vector<Scalar>& logits, int label) {
  if (logits.size() < 2) throw ShapeError("softmax_cross_entropy: need at least 2 classes");
  if (label < 0 || label >= logits.size()) {
    throw LabelError("softmax_cross_entropy: label " + std::to_string(label) + " not in [0, " +
                     std::to_string(logits.size()) + ")");
  }
  const Scalar m = logits.maxCoeff();
  const Eigen::Array<Scalar, Eigen::Dynamic, 1> e = (logits.array() - m).exp();
  const Scalar z = e.sum();
  Vector<Scalar> p = (e / z).matrix();
  const Scalar loss = -(logits(label) - m - std::log(z));
  return {loss, std::move(p)};
}

/// Index of the largest entry; ties go to the lowest index.
template <typename Derived>
int argmax_lowest(const Eigen::MatrixBase<Derived>& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace csifuse::nn
