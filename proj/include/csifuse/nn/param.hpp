#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "csifuse/csi.hpp"
#include "csifuse/random.hpp"

namespace csifuse::nn {

/// A learnable tensor with its accumulated gradient. Vectors are stored as
/// single-column matrices; `rank` records how they are serialised.
template <typename Scalar>
struct Param {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  int rank = 2;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols, int r = 2)
      : name(std::move(n)), value(Matrix<Scalar>::Zero(rows, cols)), grad(Matrix<Scalar>::Zero(rows, cols)), rank(r) {}

  static Param vector(std::string n, Eigen::Index len) { return Param(std::move(n), len, 1, 1); }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename Scalar>
using ParamRefs = std::vector<Param<Scalar>*>;

/// Sorts by name, the canonical ordering for checkpoints and optimisers.
template <typename Scalar>
void sort_by_name(ParamRefs<Scalar>& params) {
  std::sort(params.begin(), params.end(), [](const auto* a, const auto* b) { return a->name < b->name; });
}

template <typename Scalar>
void fill_uniform(Matrix<Scalar>& m, Scalar bound, SplitMix64& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      m(i, j) = static_cast<Scalar>(rng.uniform(-static_cast<double>(bound), static_cast<double>(bound)));
    }
  }
}

/// Weight init for a dense layer: U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero bias.
template <typename Scalar>
void init_dense(Param<Scalar>& weight, Param<Scalar>& bias, SplitMix64& rng) {
  fill_uniform(weight.value, static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(weight.value.cols()))), rng);
  bias.value.setZero();
}

}  // namespace csifuse::nn
