#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "csifuse/csi.hpp"
#include "csifuse/phase.hpp"

namespace csifuse {

/// Activity names in class-index order.
inline constexpr std::array<const char*, 8> kActivityNames = {"Arc",  "Elbow", "Rectangle", "Silence",
                                                              "SLFW", "SLRL",  "SLUD",      "Triangle"};

/// Parameters of the synthetic robotic-arm CSI generator.
struct SynthConfig {
  int subcarriers = 64;
  int packets = 128;
  int channels = 1;
  int classes = 8;
  int samples_per_cell = 40;  // per (class, velocity)
  std::array<double, 3> velocity_factors = {0.5, 1.0, 2.0};
  double noise_std = 0.05;
  double max_slope = 0.2;               // per-packet impairment alpha ~ U[-max_slope, max_slope]
  double max_offset = 3.141592653589793;  // per-packet impairment beta ~ U[-max_offset, max_offset]
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t total_samples() const {
    return static_cast<std::size_t>(classes) * kNumVelocities * static_cast<std::size_t>(samples_per_cell);
  }
};

/// A generated sample together with the quantities used to build it.
struct SynthSample {
  LabeledSample sample;
  std::vector<Matrix<double>> true_amplitude;  // per receiver, S x T
  std::vector<Matrix<double>> true_phase;      // per receiver, before impairments and wrapping
  std::vector<TrendParams<double>> impairment;  // per receiver, per packet alpha_t, beta_t
  /// Per receiver, per subcarrier multiple of 2*pi added by wrapping the first
  /// packet. Temporal unwrapping keeps this branch for the whole sample.
  std::vector<Vector<double>> branch_offset;
};

/// Scatterer trajectory templates evaluated at normalised time tau (period 1).
/// `amplitude_template` drives the attenuation pattern, `path_template` the
/// path-length (phase) modulation.
double amplitude_template(int activity, double tau);
double path_template(int activity, double tau);

/// Generates the full dataset, ordered by velocity, then class, then repeat.
/// Each sample uses its own stream derived from (seed, index).
std::vector<LabeledSample> generate(const SynthConfig& cfg);
std::vector<SynthSample> generate_with_truth(const SynthConfig& cfg);
SynthSample generate_one(const SynthConfig& cfg, int activity, Velocity velocity, std::size_t index);

/// Wraps an angle into (-pi, pi].
double wrap_phase(double x);

/// Train/test partition for one held-out velocity.
struct LovoSplit {
  Velocity held_out = Velocity::V3;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Samples of the held-out velocity form the test set, all others train.
/// Requires all three velocities to be present.
LovoSplit lovo_split(const std::vector<LabeledSample>& samples, Velocity held_out);

/// Moves a class-stratified `fraction` of `train` into a validation set,
/// chosen by `seed`. Returns {remaining train, validation}, each sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> carve_validation(
    const std::vector<LabeledSample>& samples, const std::vector<std::size_t>& train, double fraction,
    std::uint64_t seed);

/// What an externally converted dataset must satisfy.
struct SchemaDescriptor {
  int classes = 8;
  int velocities = 3;
  std::vector<std::string> names;

  /// RoboFiSense: 8 activities at 3 velocities.
  static SchemaDescriptor robofisense();
};

/// Parses `key=value` lines (classes, velocities, names as a comma list).
/// Blank lines and lines starting with '#' are ignored.
SchemaDescriptor parse_schema(const std::string& text);
SchemaDescriptor load_schema(const std::filesystem::path& path);

/// Reads a CSIB file and checks label and velocity ranges against `schema`.
std::vector<LabeledSample> ingest_external(const std::filesystem::path& path, const SchemaDescriptor& schema);
void validate_samples(const std::vector<LabeledSample>& samples, const SchemaDescriptor& schema);

}  // namespace csifuse
