#pragma once

#include <cmath>
#include <span>
#include <string>

#include "csifuse/nn/tape.hpp"

// Differentiable ops over tape variables. Sequences are stored as
// [features x (T*B)] matrices where column t*B + b is time step t of batch
// element b, so a time step is a contiguous block of B columns.

namespace csifuse::nn {

namespace detail {

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) + (-x).exp()).inverse();
}

inline std::string dims(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

}  // namespace detail

/// W X
template <typename Scalar>
Var matmul(Tape<Scalar>& t, Var w, Var x) {
  const auto& W = t.value(w);
  const auto& X = t.value(x);
  if (W.cols() != X.rows()) throw ShapeError("matmul: " + detail::dims(W.rows(), W.cols()) + " * " + detail::dims(X.rows(), X.cols()));
  Matrix<Scalar> y = W * X;
  return t.record(std::move(y), t.any_requires_grad(w, x), [&t, w, x](const Matrix<Scalar>& dy, const Matrix<Scalar>&) {
    if (t.requires_grad(w)) t.accumulate(w, dy * t.value(x).transpose());
    if (t.requires_grad(x)) t.accumulate(x, t.value(w).transpose() * dy);
  });
}

/// W X + b, bias broadcast over columns.
template <typename Scalar>
Var linear(Tape<Scalar>& t, Var w, Var b, Var x) {
  const auto& W = t.value(w);
  const auto& B = t.value(b);
  const auto& X = t.value(x);
  if (W.cols() != X.rows() || B.rows() != W.rows() || B.cols() != 1) {
    throw ShapeError("linear: weight " + detail::dims(W.rows(), W.cols()) + ", bias " + detail::dims(B.rows(), B.cols()) +
                     ", input " + detail::dims(X.rows(), X.cols()));
  }
  Matrix<Scalar> y = W * X;
  y.colwise() += B.col(0);
  return t.record(std::move(y), t.any_requires_grad(w, b, x), [&t, w, b, x](const Matrix<Scalar>& dy, const Matrix<Scalar>&) {
    if (t.requires_grad(w)) t.accumulate(w, dy * t.value(x).transpose());
    if (t.requires_grad(b)) t.accumulate(b, dy.rowwise().sum());
    if (t.requires_grad(x)) t.accumulate(x, t.value(w).transpose() * dy);
  });
}

template <typename Scalar>
Var add(Tape<Scalar>& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw ShapeError("add: shape mismatch");
  Matrix<Scalar> y = A + B;
  return t.record(std::move(y), t.any_requires_grad(a, b), [&t, a, b](const Matrix<Scalar>& dy, const Matrix<Scalar>&) {
    t.accumulate(a, dy);
    t.accumulate(b, dy);
  });
}

/// Sum of all entries, as a 1x1 value.
template <typename Scalar>
Var sum(Tape<Scalar>& t, Var x) {
  Matrix<Scalar> y(1, 1);
  y(0, 0) = t.value(x).sum();
  return t.record(std::move(y), t.requires_grad(x), [&t, x](const Matrix<Scalar>& dy, const Matrix<Scalar>&) {
    const auto& X = t.value(x);
    t.accumulate(x, Matrix<Scalar>::Constant(X.rows(), X.cols(), dy(0, 0)));
  });
}

template <typename Scalar>
Var relu(Tape<Scalar>& t, Var x) {
  Matrix<Scalar> y = t.value(x).cwiseMax(Scalar(0));
  return t.record(std::move(y), t.requires_grad(x), [&t, x](const Matrix<Scalar>& dy, const Matrix<Scalar>&) {
    t.accumulate(x, (t.value(x).array() > Scalar(0)).select(dy.array(), Scalar(0)).matrix());
  });
}

template <typename Scalar>
Var sigmoid(Tape<Scalar>& t, Var x) {
  Matrix<Scalar> y = detail::sigmoid(t.value(x).array()).matrix();
  return t.record(std::move(y), t.requires_grad(x), [&t, x](const Matrix<Scalar>& dy, const Matrix<Scalar>& y) {
    t.accumulate(x, (dy.array() * y.array() * (Scalar(1) - y.array())).matrix());
  });
}

template <typename Scalar>
Var tanh(Tape<Scalar>& t, Var x) {
  Matrix<Scalar> y = t.value(x).array().tanh().matrix();
  return t.record(std::move(y), t.requires_grad(x), [&t, x](const Matrix<Scalar>& dy, const Matrix<Scalar>& y) {
    t.accumulate(x, (dy.array() * (Scalar(1) - y.array().square())).matrix());
  });
}

/// Elementwise product with a fixed mask (dropout, stream masking).
template <typename Scalar>
Var mask(Tape<Scalar>& t, Var x, Matrix<Scalar> m) {
  const auto& X = t.value(x);
  if (X.rows() != m.rows() || X.cols() != m.cols()) throw ShapeError("mask: shape mismatch");
  Matrix<Scalar> y = X.cwiseProduct(m);
  return t.record(std::move(y), t.requires_grad(x), [&t, x, m = std::move(m)](const Matrix<Scalar>& dy, const Matrix<Scalar>&) {
    t.accumulate(x, dy.cwiseProduct(m));
  });
}

/// [a; b] along the feature axis.
template <typename Scalar>
Var concat_rows(Tape<Scalar>& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  if (A.cols() != B.cols()) throw ShapeError("concat_rows: column counts differ");
  Matrix<Scalar> y(A.rows() + B.rows(), A.cols());
  y.topRows(A.rows()) = A;
  y.bottomRows(B.rows()) = B;
  const Eigen::Index ra = A.rows();
  const Eigen::Index rb = B.rows();
  return t.record(std::move(y), t.any_requires_grad(a, b), [&t, a, b, ra, rb](const Matrix<Scalar>& dy, const Matrix<Scalar>&) {
    t.accumulate(a, dy.topRows(ra));
    t.accumulate(b, dy.bottomRows(rb));
  });
}

/// Layer normalisation of every column. Rows are split into `groups` equal
/// blocks, each normalised with its own mean and population variance, then
/// scaled and shifted by the full-length gamma and beta.
template <typename Scalar>
Var layer_norm(Tape<Scalar>& t, Var x, Var gamma, Var beta, Scalar eps, Eigen::Index groups = 1) {
  const auto& X = t.value(x);
  const auto& G = t.value(gamma);
  const auto& Bt = t.value(beta);
  const Eigen::Index f = X.rows();
  if (groups < 1 || f % groups != 0) throw ShapeError("layer_norm: feature count not divisible into groups");
  if (G.rows() != f || Bt.rows() != f || G.cols() != 1 || Bt.cols() != 1) {
    throw ShapeError("layer_norm: gamma/beta length " + std::to_string(G.rows()) + " vs features " + std::to_string(f));
  }
  const Eigen::Index width = f / groups;
  const Eigen::Index n = X.cols();
  Matrix<Scalar> xhat(f, n);
  Matrix<Scalar> inv_std(groups, n);
  for (Eigen::Index g = 0; g < groups; ++g) {
    const auto block = X.middleRows(g * width, width);
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean = block.colwise().mean();
    auto centred = xhat.middleRows(g * width, width);
    centred = block.rowwise() - mean;
    const Eigen::Array<Scalar, 1, Eigen::Dynamic> var = centred.colwise().squaredNorm() / static_cast<Scalar>(width);
    inv_std.row(g) = (var + eps).rsqrt().matrix();
    centred = centred * inv_std.row(g).asDiagonal();
  }
  Matrix<Scalar> y = G.col(0).asDiagonal() * xhat;
  y.colwise() += Bt.col(0);
  return t.record(std::move(y), t.any_requires_grad(x, gamma, beta),
                  [&t, x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), width,
                   groups](const Matrix<Scalar>& dy, const Matrix<Scalar>&) {
                    if (t.requires_grad(gamma)) t.accumulate(gamma, dy.cwiseProduct(xhat).rowwise().sum());
                    if (t.requires_grad(beta)) t.accumulate(beta, dy.rowwise().sum());
                    if (!t.requires_grad(x)) return;
                    Matrix<Scalar> dxhat = t.value(gamma).col(0).asDiagonal() * dy;
                    Matrix<Scalar> dx(dxhat.rows(), dxhat.cols());
                    for (Eigen::Index g = 0; g < groups; ++g) {
                      const auto dh = dxhat.middleRows(g * width, width);
                      const auto xh = xhat.middleRows(g * width, width);
                      const Matrix<Scalar> mean_d = dh.colwise().mean();
                      const Matrix<Scalar> mean_dx = dh.cwiseProduct(xh).colwise().sum() / static_cast<Scalar>(width);
                      auto out = dx.middleRows(g * width, width);
                      out = dh.rowwise() - mean_d.row(0);
                      out -= xh * mean_dx.row(0).asDiagonal();
                      out = out * inv_std.row(g).asDiagonal();
                    }
                    t.accumulate(x, dx);
                  });
}

/// z = g * a + (1 - g) * b, elementwise.
template <typename Scalar>
Var gate_mix(Tape<Scalar>& t, Var g, Var a, Var b) {
  const auto& G = t.value(g);
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  if (G.rows() != A.rows() || G.cols() != A.cols() || A.rows() != B.rows() || A.cols() != B.cols()) {
    throw ShapeError("gate_mix: shape mismatch");
  }
  Matrix<Scalar> z = (G.array() * A.array() + (Scalar(1) - G.array()) * B.array()).matrix();
  return t.record(std::move(z), t.any_requires_grad(g, a, b), [&t, g, a, b](const Matrix<Scalar>& dz, const Matrix<Scalar>&) {
    const auto& Gv = t.value(g);
    if (t.requires_grad(g)) t.accumulate(g, (dz.array() * (t.value(a).array() - t.value(b).array())).matrix());
    if (t.requires_grad(a)) t.accumulate(a, dz.cwiseProduct(Gv));
    if (t.requires_grad(b)) t.accumulate(b, (dz.array() * (Scalar(1) - Gv.array())).matrix());
  });
}

/// Mean over the T time blocks: [F x (T*B)] -> [F x B].
template <typename Scalar>
Var mean_pool_time(Tape<Scalar>& t, Var x, Eigen::Index batch) {
  const auto& X = t.value(x);
  if (batch < 1 || X.cols() % batch != 0) throw ShapeError("mean_pool_time: columns not a multiple of batch");
  const Eigen::Index steps = X.cols() / batch;
  Matrix<Scalar> y = Matrix<Scalar>::Zero(X.rows(), batch);
  for (Eigen::Index s = 0; s < steps; ++s) y += X.middleCols(s * batch, batch);
  y /= static_cast<Scalar>(steps);
  return t.record(std::move(y), t.requires_grad(x), [&t, x, batch, steps](const Matrix<Scalar>& dy, const Matrix<Scalar>&) {
    Matrix<Scalar> dx = dy.replicate(1, steps) / static_cast<Scalar>(steps);
    t.accumulate(x, dx);
  });
}

/// Mean cross-entropy over the batch columns of `logits` [C x B]. The
/// softmax probabilities are written to `probs` when non-null.
template <typename Scalar>
Var softmax_cross_entropy(Tape<Scalar>& t, Var logits, std::span<const int> labels, Matrix<Scalar>* probs = nullptr) {
  const auto& L = t.value(logits);
  const Eigen::Index classes = L.rows();
  const Eigen::Index batch = L.cols();
  if (static_cast<Eigen::Index>(labels.size()) != batch) throw ShapeError("softmax_cross_entropy: label count != batch");
  Matrix<Scalar> p(classes, batch);
  Scalar loss = 0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    if (y < 0 || y >= classes) throw LabelError("softmax_cross_entropy: label " + std::to_string(y) + " out of range");
    const Scalar m = L.col(b).maxCoeff();
    const Eigen::Array<Scalar, Eigen::Dynamic, 1> e = (L.col(b).array() - m).exp();
    const Scalar z = e.sum();
    p.col(b) = (e / z).matrix();
    loss += -(L(y, b) - m - std::log(z));
  }
  loss /= static_cast<Scalar>(batch);
  if (probs != nullptr) *probs = p;
  Matrix<Scalar> out(1, 1);
  out(0, 0) = loss;
  std::vector<int> ys(labels.begin(), labels.end());
  return t.record(std::move(out), t.requires_grad(logits), [&t, logits, p = std::move(p), ys = std::move(ys)](const Matrix<Scalar>& dy, const Matrix<Scalar>&) {
    Matrix<Scalar> dl = p;
    for (std::size_t b = 0; b < ys.size(); ++b) dl(ys[b], static_cast<Eigen::Index>(b)) -= Scalar(1);
    dl *= dy(0, 0) / static_cast<Scalar>(ys.size());
    t.accumulate(logits, dl);
  });
}

}  // namespace csifuse::nn
