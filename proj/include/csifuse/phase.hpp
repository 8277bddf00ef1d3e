#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csifuse/csi.hpp"

namespace csifuse {

// ---------------------------------------------------------------------------
// Temporal unwrapping
// ---------------------------------------------------------------------------

/// Unwraps one time series in place. A correction is applied only when a
/// consecutive difference is strictly larger than pi in magnitude; the
/// corrected difference then lies in [-pi, pi].
template <typename Derived>
void unwrap_series(Eigen::DenseBase<Derived>& series) {
  using Scalar = typename Derived::Scalar;
  constexpr Scalar kPi = std::numbers::pi_v<Scalar>;
  constexpr Scalar kTwoPi = 2 * kPi;
  std::int64_t turns = 0;
  Scalar prev_raw = series.size() > 0 ? series(0) : Scalar(0);
  for (Eigen::Index t = 1; t < series.size(); ++t) {
    const Scalar raw = series(t);
    const Scalar d = raw - prev_raw;
    prev_raw = raw;
    if (std::abs(d) > kPi) {
      Scalar wrapped = std::fmod(d + kPi, kTwoPi);
      if (wrapped < 0) wrapped += kTwoPi;
      wrapped -= kPi;
      if (wrapped == -kPi && d > 0) wrapped = kPi;
      turns += static_cast<std::int64_t>(std::llround((wrapped - d) / kTwoPi));
    }
    series(t) = raw + kTwoPi * static_cast<Scalar>(turns);
  }
}

/// Removes 2*pi jumps along time, independently for each subcarrier (row).
template <typename Scalar>
PhaseMatrix<Scalar> unwrap_temporal(const PhaseMatrix<Scalar>& phase) {
  if (phase.state != PhaseState::kRaw) {
    throw StateError(std::string("unwrap_temporal: expected raw phase, got ") + to_string(phase.state));
  }
  PhaseMatrix<Scalar> out{phase.values, PhaseState::kUnwrapped};
  for (Eigen::Index k = 0; k < out.values.rows(); ++k) {
    auto row = out.values.row(k);
    unwrap_series(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-packet linear sanitization
// ---------------------------------------------------------------------------

/// Least-squares line over 1-based subcarrier indices: phi_k ~ alpha*k + beta.
template <typename Scalar>
struct LinearTrend {
  Scalar alpha = 0;
  Scalar beta = 0;
};

/// Per-packet slopes and offsets removed by sanitize().
template <typename Scalar>
struct TrendParams {
  Vector<Scalar> alpha;
  Vector<Scalar> beta;
};

/// Closed-form solution of the 2x2 normal equations for X = [k 1], k = 1..S.
/// Uses the centred form alpha = sum((k - kbar) phi) / sum((k - kbar)^2),
/// beta = mean(phi) - alpha * kbar.
template <typename Derived>
LinearTrend<typename Derived::Scalar> fit_linear_trend(const Eigen::MatrixBase<Derived>& column) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = column.size();
  if (n < 2) {
    throw UnderdeterminedError("fit_linear_trend: need at least 2 subcarriers, got " + std::to_string(n));
  }
  const Scalar s = static_cast<Scalar>(n);
  const Scalar k_mean = (s + 1) / 2;
  const Scalar k_var = s * (s * s - 1) / 12;  // sum of (k - kbar)^2
  Scalar mean = 0;
  Scalar cov = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    mean += column(i);
    cov += (static_cast<Scalar>(i + 1) - k_mean) * column(i);
  }
  mean /= s;
  LinearTrend<Scalar> fit;
  fit.alpha = cov / k_var;
  fit.beta = mean - fit.alpha * k_mean;
  return fit;
}

/// Subtracts each packet's least-squares line across subcarriers.
template <typename Scalar>
std::pair<PhaseMatrix<Scalar>, TrendParams<Scalar>> sanitize(const PhaseMatrix<Scalar>& phase) {
  if (phase.state != PhaseState::kUnwrapped) {
    throw StateError(std::string("sanitize: expected unwrapped phase, got ") + to_string(phase.state));
  }
  const Eigen::Index rows = phase.values.rows();
  const Eigen::Index cols = phase.values.cols();
  PhaseMatrix<Scalar> out{Matrix<Scalar>(rows, cols), PhaseState::kSanitized};
  TrendParams<Scalar> trend{Vector<Scalar>(cols), Vector<Scalar>(cols)};
  for (Eigen::Index t = 0; t < cols; ++t) {
    const auto fit = fit_linear_trend(phase.values.col(t));
    trend.alpha(t) = fit.alpha;
    trend.beta(t) = fit.beta;
    for (Eigen::Index k = 0; k < rows; ++k) {
      out.values(k, t) = phase.values(k, t) - (fit.alpha * static_cast<Scalar>(k + 1) + fit.beta);
    }
  }
  return {std::move(out), std::move(trend)};
}

// ---------------------------------------------------------------------------
// Model input configurations
// ---------------------------------------------------------------------------

enum class InputConfig : std::uint8_t {
  kPhaseOnlyUnwrapped = 0,
  kAmplitudeOnly = 1,
  kAmpPlusUnwrapped = 2,
  kAmpPlusSanitized = 3,
};

inline constexpr std::array<InputConfig, 4> kAllInputConfigs = {
    InputConfig::kPhaseOnlyUnwrapped, InputConfig::kAmplitudeOnly, InputConfig::kAmpPlusUnwrapped,
    InputConfig::kAmpPlusSanitized};

/// Model channels produced per receiver.
constexpr int channel_multiplier(InputConfig c) {
  return (c == InputConfig::kAmpPlusUnwrapped || c == InputConfig::kAmpPlusSanitized) ? 2 : 1;
}

constexpr bool has_amplitude(InputConfig c) { return c != InputConfig::kPhaseOnlyUnwrapped; }
constexpr bool has_phase(InputConfig c) { return c != InputConfig::kAmplitudeOnly; }

/// Table column number, 1..4.
constexpr int column_index(InputConfig c) { return static_cast<int>(c) + 1; }

/// Command-line token: phase, amp, amp-unw, amp-san.
inline std::string_view cli_name(InputConfig c) {
  switch (c) {
    case InputConfig::kPhaseOnlyUnwrapped: return "phase";
    case InputConfig::kAmplitudeOnly: return "amp";
    case InputConfig::kAmpPlusUnwrapped: return "amp-unw";
    case InputConfig::kAmpPlusSanitized: return "amp-san";
  }
  return "?";
}

inline std::optional<InputConfig> parse_input_config(std::string_view token) {
  for (auto c : kAllInputConfigs) {
    if (cli_name(c) == token) return c;
  }
  return std::nullopt;
}

/// Real tensor [M x S x T] stored as M matrices of S x T. For each receiver
/// the amplitude channel comes before the phase channel.
template <typename Scalar>
struct ModelInput {
  std::vector<Matrix<Scalar>> channels;
  InputConfig config = InputConfig::kAmpPlusSanitized;

  Eigen::Index subcarriers() const { return channels.empty() ? 0 : channels.front().rows(); }
  Eigen::Index packets() const { return channels.empty() ? 0 : channels.front().cols(); }
  /// Number of receivers that contributed.
  Eigen::Index receivers() const {
    return static_cast<Eigen::Index>(channels.size()) / channel_multiplier(config);
  }
};

/// Phase channel for configurations that carry one.
template <typename Scalar>
Matrix<Scalar> processed_phase(const PhaseMatrix<Scalar>& raw_phase, InputConfig config) {
  auto unwrapped = unwrap_temporal(raw_phase);
  if (config == InputConfig::kAmpPlusSanitized) return sanitize(unwrapped).first.values;
  return std::move(unwrapped.values);
}

/// Builds the model channels for a single receiver.
template <typename Scalar>
ModelInput<Scalar> build_model_input(const AmplitudeMatrix<Scalar>& amp, const PhaseMatrix<Scalar>& raw_phase,
                                     InputConfig config) {
  if (amp.values.rows() != raw_phase.values.rows() || amp.values.cols() != raw_phase.values.cols()) {
    throw ShapeError("build_model_input: amplitude is " + std::to_string(amp.values.rows()) + "x" +
                     std::to_string(amp.values.cols()) + " but phase is " +
                     std::to_string(raw_phase.values.rows()) + "x" + std::to_string(raw_phase.values.cols()));
  }
  ModelInput<Scalar> input;
  input.config = config;
  if (has_amplitude(config)) input.channels.push_back(amp.values);
  if (has_phase(config)) input.channels.push_back(processed_phase(raw_phase, config));
  return input;
}

/// Preprocesses every receiver of a sample independently and stacks the
/// results along the channel axis. Computation runs in `Work` precision.
template <typename Scalar, typename Work = double>
ModelInput<Scalar> preprocess(const LabeledSample& sample, InputConfig config) {
  ModelInput<Scalar> input;
  input.config = config;
  input.channels.reserve(sample.channels.size() * channel_multiplier(config));
  for (const auto& rx : sample.channels) {
    if (rx.subcarriers() < 2) throw ShapeError("preprocess: need at least 2 subcarriers");
    auto [amp, phase] = decompose<float, Work>(rx);
    auto part = build_model_input(amp, phase, config);
    for (auto& ch : part.channels) input.channels.push_back(ch.template cast<Scalar>());
  }
  return input;
}

}  // namespace csifuse
