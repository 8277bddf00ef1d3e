#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "csifuse/nn/param.hpp"

namespace csifuse::nn {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 2e-5;
};

/// Adam moments for a fixed, ordered parameter list.
template <typename Scalar>
struct AdamWState {
  std::vector<Matrix<Scalar>> m;
  std::vector<Matrix<Scalar>> v;
  long step = 0;

  AdamWState() = default;
  explicit AdamWState(const ParamRefs<Scalar>& params) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (const auto* p : params) {
      m.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      v.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }
};

/// One AdamW update using each parameter's accumulated gradient:
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
/// with decay taken on the pre-update theta. Gradients are validated before
/// anything is modified.
template <typename Scalar>
void adamw_step(AdamWState<Scalar>& state, const ParamRefs<Scalar>& params, const AdamWConfig& cfg) {
  if (state.m.size() != params.size()) throw ShapeError("adamw_step: optimizer state does not match parameters");
  for (const auto* p : params) {
    if (p->grad.size() != 0 && !p->grad.allFinite()) {
      throw TrainingError("adamw_step: non-finite gradient in parameter '" + p->name + "'");
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const auto b1 = static_cast<Scalar>(cfg.beta1);
  const auto b2 = static_cast<Scalar>(cfg.beta2);
  const auto lr = static_cast<Scalar>(cfg.lr);
  const auto decay = static_cast<Scalar>(cfg.lr * cfg.weight_decay);
  const auto eps = static_cast<Scalar>(cfg.eps);
  const auto inv_bc1 = static_cast<Scalar>(1.0 / bc1);
  const auto inv_bc2 = static_cast<Scalar>(1.0 / bc2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    if (p.grad.size() == 0) p.zero_grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = b1 * m + (Scalar(1) - b1) * p.grad;
    v.array() = b2 * v.array() + (Scalar(1) - b2) * p.grad.array().square();
    const auto m_hat = m.array() * inv_bc1;
    const auto v_hat = v.array() * inv_bc2;
    p.value.array() -= decay * p.value.array() + lr * m_hat / (v_hat.sqrt() + eps);
  }
}

}  // namespace csifuse::nn
