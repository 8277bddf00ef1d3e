#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "csifuse/nn/ops.hpp"

namespace csifuse::nn {

/// One LSTM direction. Gate rows are stacked in the order input, forget,
/// cell candidate, output: rows [0,h), [h,2h), [2h,3h), [3h,4h).
template <typename Scalar>
struct LstmCellParams {
  Param<Scalar> w_input;      // 4h x d
  Param<Scalar> w_recurrent;  // 4h x h
  Param<Scalar> bias;         // 4h

  LstmCellParams() = default;
  LstmCellParams(const std::string& prefix, Eigen::Index input_width, Eigen::Index hidden)
      : w_input(prefix + ".w_input", 4 * hidden, input_width),
        w_recurrent(prefix + ".w_recurrent", 4 * hidden, hidden),
        bias(Param<Scalar>::vector(prefix + ".bias", 4 * hidden)) {}

  Eigen::Index input_width() const { return w_input.value.cols(); }
  Eigen::Index hidden() const { return w_recurrent.value.cols(); }

  /// Weights U(-1/sqrt(h), 1/sqrt(h)); forget-gate bias 1, other biases 0.
  void init(SplitMix64& rng) {
    const auto bound = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(hidden())));
    fill_uniform(w_input.value, bound, rng);
    fill_uniform(w_recurrent.value, bound, rng);
    bias.value.setZero();
    bias.value.middleRows(hidden(), hidden()).setOnes();
  }

  void collect(ParamRefs<Scalar>& out) {
    out.push_back(&w_input);
    out.push_back(&w_recurrent);
    out.push_back(&bias);
  }

  void check_shapes() const {
    const Eigen::Index h = w_recurrent.value.cols();
    if (w_recurrent.value.rows() != 4 * h || w_input.value.rows() != 4 * h || bias.value.rows() != 4 * h ||
        bias.value.cols() != 1) {
      throw ShapeError("LstmCellParams: inconsistent shapes for hidden width " + std::to_string(h));
    }
  }
};

/// Forward and backward directions of a bidirectional layer.
template <typename Scalar>
struct BiLstmParams {
  LstmCellParams<Scalar> forward;
  LstmCellParams<Scalar> backward;

  BiLstmParams() = default;
  BiLstmParams(const std::string& prefix, Eigen::Index input_width, Eigen::Index hidden)
      : forward(prefix + ".fwd", input_width, hidden), backward(prefix + ".bwd", input_width, hidden) {}

  void init(SplitMix64& rng) {
    forward.init(rng);
    backward.init(rng);
  }
  void collect(ParamRefs<Scalar>& out) {
    forward.collect(out);
    backward.collect(out);
  }
};

/// One step of the standard recurrence:
///   i, f, o = sigmoid(.), g = tanh(.), c = f*c_prev + i*g, h = o*tanh(c).
template <typename Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> lstm_cell_step(const LstmCellParams<Scalar>& p, const Vector<Scalar>& x,
                                                         const Vector<Scalar>& h_prev, const Vector<Scalar>& c_prev) {
  p.check_shapes();
  const Eigen::Index h = p.hidden();
  if (x.size() != p.input_width() || h_prev.size() != h || c_prev.size() != h) {
    throw ShapeError("lstm_cell_step: expected x[" + std::to_string(p.input_width()) + "], h/c[" + std::to_string(h) +
                     "]");
  }
  const Vector<Scalar> pre = p.w_input.value * x + p.w_recurrent.value * h_prev + p.bias.value.col(0);
  const auto i = detail::sigmoid(pre.segment(0, h).array());
  const auto f = detail::sigmoid(pre.segment(h, h).array());
  const auto g = pre.segment(2 * h, h).array().tanh();
  const auto o = detail::sigmoid(pre.segment(3 * h, h).array());
  Vector<Scalar> c = (f * c_prev.array() + i * g).matrix();
  Vector<Scalar> hn = (o * c.array().tanh()).matrix();
  return {std::move(hn), std::move(c)};
}

/// Runs a bidirectional layer over a sequence given as columns of `seq`
/// [d x T]. Returns [2h x T]: forward states on top, backward states (run on
/// the reversed sequence and re-aligned to t) below.
template <typename Scalar>
Matrix<Scalar> bilstm_forward(const LstmCellParams<Scalar>& fwd, const LstmCellParams<Scalar>& bwd,
                              const Matrix<Scalar>& seq) {
  if (seq.cols() == 0) throw InputError("bilstm_forward: empty sequence");
  const Eigen::Index steps = seq.cols();
  const Eigen::Index h = fwd.hidden();
  if (bwd.hidden() != h) throw ShapeError("bilstm_forward: direction widths differ");
  Matrix<Scalar> out(2 * h, steps);
  Vector<Scalar> hs = Vector<Scalar>::Zero(h);
  Vector<Scalar> cs = Vector<Scalar>::Zero(h);
  for (Eigen::Index t = 0; t < steps; ++t) {
    std::tie(hs, cs) = lstm_cell_step<Scalar>(fwd, seq.col(t), hs, cs);
    out.col(t).head(h) = hs;
  }
  hs.setZero();
  cs.setZero();
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    std::tie(hs, cs) = lstm_cell_step<Scalar>(bwd, seq.col(t), hs, cs);
    out.col(t).tail(h) = hs;
  }
  return out;
}

/// Tape op: one LSTM direction over a batched sequence [d x (T*B)], zero
/// initial state. Returns hidden states [h x (T*B)] aligned to input time.
/// Backward is truncation-free BPTT.
template <typename Scalar>
Var lstm_sequence(Tape<Scalar>& t, Var w_input, Var w_recurrent, Var bias, Var x, Eigen::Index batch, bool reverse) {
  using Mat = Matrix<Scalar>;
  const Mat& Wx = t.value(w_input);
  const Mat& Wh = t.value(w_recurrent);
  const Mat& Bv = t.value(bias);
  const Mat& X = t.value(x);
  const Eigen::Index h = Wh.cols();
  if (Wh.rows() != 4 * h || Wx.rows() != 4 * h || Bv.rows() != 4 * h || Wx.cols() != X.rows()) {
    throw ShapeError("lstm_sequence: weights " + detail::dims(Wx.rows(), Wx.cols()) + " / " +
                     detail::dims(Wh.rows(), Wh.cols()) + " incompatible with input " + detail::dims(X.rows(), X.cols()));
  }
  if (batch < 1 || X.cols() == 0 || X.cols() % batch != 0) throw InputError("lstm_sequence: empty or ragged sequence");
  const Eigen::Index steps = X.cols() / batch;

  // Pre-activations from the input for every step at once.
  Mat gates = Wx * X;
  gates.colwise() += Bv.col(0);
  Mat cells(h, X.cols());
  Mat tanh_cells(h, X.cols());
  Mat hidden(h, X.cols());
  Mat h_prev = Mat::Zero(h, batch);
  Mat c_prev = Mat::Zero(h, batch);
  for (Eigen::Index s = 0; s < steps; ++s) {
    const Eigen::Index col = (reverse ? steps - 1 - s : s) * batch;
    auto g = gates.middleCols(col, batch);
    g.noalias() += Wh * h_prev;
    g.topRows(2 * h) = detail::sigmoid(g.topRows(2 * h).array()).matrix();
    g.middleRows(2 * h, h) = g.middleRows(2 * h, h).array().tanh().matrix();
    g.bottomRows(h) = detail::sigmoid(g.bottomRows(h).array()).matrix();
    auto c = cells.middleCols(col, batch);
    c = (g.middleRows(h, h).array() * c_prev.array() + g.topRows(h).array() * g.middleRows(2 * h, h).array()).matrix();
    auto tc = tanh_cells.middleCols(col, batch);
    tc = c.array().tanh().matrix();
    auto hs = hidden.middleCols(col, batch);
    hs = (g.bottomRows(h).array() * tc.array()).matrix();
    h_prev = hs;
    c_prev = c;
  }

  const bool needs = t.any_requires_grad(w_input, w_recurrent, bias, x);
  return t.record(
      std::move(hidden), needs,
      [&t, w_input, w_recurrent, bias, x, batch, steps, h, reverse, gates = std::move(gates), cells = std::move(cells),
       tanh_cells = std::move(tanh_cells)](const Mat& dH, const Mat& hidden) {
        const Mat& Wh = t.value(w_recurrent);
        Mat d_pre(4 * h, dH.cols());
        Mat h_shift = Mat::Zero(h, dH.cols());  // h_{prev} for each column
        Mat dh_next = Mat::Zero(h, batch);
        Mat dc_next = Mat::Zero(h, batch);
        for (Eigen::Index s = steps - 1; s >= 0; --s) {
          const Eigen::Index col = (reverse ? steps - 1 - s : s) * batch;
          const auto g = gates.middleCols(col, batch).array();
          const auto i = g.topRows(h);
          const auto f = g.middleRows(h, h);
          const auto cand = g.middleRows(2 * h, h);
          const auto o = g.bottomRows(h);
          const auto tc = tanh_cells.middleCols(col, batch).array();
          const Mat dh = dH.middleCols(col, batch) + dh_next;
          const auto dha = dh.array();
          Mat dc = dc_next;
          dc.array() += dha * o * (Scalar(1) - tc.square());
          auto dp = d_pre.middleCols(col, batch);
          if (s > 0) {
            const Eigen::Index pcol = (reverse ? steps - s : s - 1) * batch;
            const auto c_prev = cells.middleCols(pcol, batch).array();
            dp.middleRows(h, h) = (dc.array() * c_prev * f * (Scalar(1) - f)).matrix();
            h_shift.middleCols(col, batch) = hidden.middleCols(pcol, batch);
          } else {
            dp.middleRows(h, h).setZero();
          }
          dp.topRows(h) = (dc.array() * cand * i * (Scalar(1) - i)).matrix();
          dp.middleRows(2 * h, h) = (dc.array() * i * (Scalar(1) - cand.square())).matrix();
          dp.bottomRows(h) = (dha * tc * o * (Scalar(1) - o)).matrix();
          dc_next = (dc.array() * f).matrix();
          dh_next.noalias() = Wh.transpose() * dp;
        }
        if (t.requires_grad(w_recurrent)) t.accumulate(w_recurrent, d_pre * h_shift.transpose());
        if (t.requires_grad(w_input)) t.accumulate(w_input, d_pre * t.value(x).transpose());
        if (t.requires_grad(bias)) t.accumulate(bias, d_pre.rowwise().sum());
        if (t.requires_grad(x)) t.accumulate(x, t.value(w_input).transpose() * d_pre);
      });
}

template <typename Scalar>
Var lstm_sequence(Tape<Scalar>& t, LstmCellParams<Scalar>& p, Var x, Eigen::Index batch, bool reverse) {
  return lstm_sequence(t, t.param(p.w_input), t.param(p.w_recurrent), t.param(p.bias), x, batch, reverse);
}

/// Tape op: bidirectional layer, output [2h x (T*B)].
template <typename Scalar>
Var bilstm(Tape<Scalar>& t, BiLstmParams<Scalar>& p, Var x, Eigen::Index batch) {
  Var fwd = lstm_sequence(t, p.forward, x, batch, false);
  Var bwd = lstm_sequence(t, p.backward, x, batch, true);
  return concat_rows(t, fwd, bwd);
}

}  // namespace csifuse::nn
