#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "csifuse/error.hpp"

namespace csifuse {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Execution speed of a recorded activity.
enum class Velocity : std::uint8_t { V1 = 0, V2 = 1, V3 = 2 };

inline constexpr int kNumVelocities = 3;

inline std::string to_string(Velocity v) {
  return "V" + std::to_string(static_cast<int>(v) + 1);
}

/// Complex channel matrix, subcarriers along rows and packets along columns.
template <typename Scalar>
struct ComplexCsi {
  Matrix<Scalar> real;
  Matrix<Scalar> imag;

  ComplexCsi() = default;
  ComplexCsi(Matrix<Scalar> re, Matrix<Scalar> im) : real(std::move(re)), imag(std::move(im)) {
    if (real.rows() != imag.rows() || real.cols() != imag.cols()) {
      throw ShapeError("ComplexCsi: real and imaginary parts differ in shape");
    }
  }
  ComplexCsi(Eigen::Index subcarriers, Eigen::Index packets)
      : real(Matrix<Scalar>::Zero(subcarriers, packets)),
        imag(Matrix<Scalar>::Zero(subcarriers, packets)) {}

  Eigen::Index subcarriers() const { return real.rows(); }
  Eigen::Index packets() const { return real.cols(); }
};

/// Magnitudes |h|, nonnegative.
template <typename Scalar>
struct AmplitudeMatrix {
  Matrix<Scalar> values;
};

enum class PhaseState : std::uint8_t { kRaw, kUnwrapped, kSanitized };

inline const char* to_string(PhaseState s) {
  switch (s) {
    case PhaseState::kRaw: return "raw";
    case PhaseState::kUnwrapped: return "unwrapped";
    case PhaseState::kSanitized: return "sanitized";
  }
  return "?";
}

/// Phase in radians tagged with its processing stage.
template <typename Scalar>
struct PhaseMatrix {
  Matrix<Scalar> values;
  PhaseState state = PhaseState::kRaw;
};

/// One recording: a CSI matrix per receiver plus its activity label and speed.
struct LabeledSample {
  std::vector<ComplexCsi<float>> channels;
  std::uint8_t label = 0;
  Velocity velocity = Velocity::V1;

  Eigen::Index subcarriers() const { return channels.empty() ? 0 : channels.front().subcarriers(); }
  Eigen::Index packets() const { return channels.empty() ? 0 : channels.front().packets(); }
};

/// Splits each entry into magnitude and four-quadrant angle in (-pi, pi].
/// A zero entry gets angle 0.
template <typename Scalar, typename Out = Scalar>
std::pair<AmplitudeMatrix<Out>, PhaseMatrix<Out>> decompose(const ComplexCsi<Scalar>& csi) {
  const Eigen::Index rows = csi.subcarriers();
  const Eigen::Index cols = csi.packets();
  AmplitudeMatrix<Out> amp{Matrix<Out>(rows, cols)};
  PhaseMatrix<Out> phase{Matrix<Out>(rows, cols), PhaseState::kRaw};
  for (Eigen::Index t = 0; t < cols; ++t) {
    for (Eigen::Index k = 0; k < rows; ++k) {
      const Out re = static_cast<Out>(csi.real(k, t));
      const Out im = static_cast<Out>(csi.imag(k, t));
      if (!std::isfinite(re) || !std::isfinite(im)) {
        throw InputError("decompose: non-finite entry at (k=" + std::to_string(k) +
                         ", t=" + std::to_string(t) + ")");
      }
      amp.values(k, t) = std::hypot(re, im);
      Out angle = (re == Out(0) && im == Out(0)) ? Out(0) : std::atan2(im, re);
      // atan2 returns -pi for (-x, -0.0); fold onto the closed end of the range.
      if (angle <= -std::numbers::pi_v<Out>) angle = std::numbers::pi_v<Out>;
      phase.values(k, t) = angle;
    }
  }
  return {std::move(amp), std::move(phase)};
}

/// Inverse of decompose: a cos(phi) + j a sin(phi).
template <typename Scalar>
ComplexCsi<Scalar> recompose(const AmplitudeMatrix<Scalar>& amp, const PhaseMatrix<Scalar>& phase) {
  if (amp.values.rows() != phase.values.rows() || amp.values.cols() != phase.values.cols()) {
    throw ShapeError("recompose: amplitude and phase shapes differ");
  }
  return ComplexCsi<Scalar>(amp.values.cwiseProduct(phase.values.array().cos().matrix()),
                            amp.values.cwiseProduct(phase.values.array().sin().matrix()));
}

}  // namespace csifuse
