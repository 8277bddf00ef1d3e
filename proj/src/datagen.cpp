#include "csifuse/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "csifuse/csib.hpp"
#include "csifuse/random.hpp"

namespace csifuse {
namespace {

constexpr double kPi = std::numbers::pi;

using Point = std::array<double, 3>;

/// Back-and-forth ramp 0 -> 1 -> 0 over one period.
double sweep(double tau) {
  const double u = tau - std::floor(tau);
  return 1.0 - std::abs(2.0 * u - 1.0);
}

/// Position along a closed polygon, one lap per period.
Point loop(std::span<const Point> corners, double tau) {
  const double u = (tau - std::floor(tau)) * static_cast<double>(corners.size());
  const auto i = static_cast<std::size_t>(u) % corners.size();
  const double f = u - std::floor(u);
  const Point& a = corners[i];
  const Point& b = corners[(i + 1) % corners.size()];
  return {a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), a[2] + f * (b[2] - a[2])};
}

/// End-effector position of each activity in a unit workspace.
Point trajectory(int activity, double tau) {
  const double s = sweep(tau);
  switch (activity) {
    case 0:  // Arc
      return {std::cos(kPi * s), std::sin(kPi * s), 0.0};
    case 1:  // Elbow: along x, then up
      return {std::min(4.0 * s - 1.0, 1.0), 0.0, std::max(0.0, 2.0 * (2.0 * s - 1.0))};
    case 2: {  // Rectangle in the x-y plane
      static constexpr Point corners[] = {{-1, -1, 0}, {1, -1, 0}, {1, 1, 0}, {-1, 1, 0}};
      return loop(corners, tau);
    }
    case 3:  // Silence
      return {0.0, 0.0, 0.0};
    case 4:  // SLFW: straight line forward/back
      return {0.0, 2.0 * s - 1.0, 0.0};
    case 5:  // SLRL: straight line right/left
      return {2.0 * s - 1.0, 0.0, 0.0};
    case 6:  // SLUD: straight line up/down
      return {0.0, 0.0, 2.0 * s - 1.0};
    case 7: {  // Triangle in the x-z plane
      static constexpr Point corners[] = {{-1, 0, -1}, {1, 0, -1}, {0, 0, 1}};
      return loop(corners, tau);
    }
    default:
      break;
  }
  // Extra classes beyond the eight named activities: rotated arcs.
  const double rot = 0.7 * activity;
  return {std::cos(kPi * s + rot), 0.5 * std::sin(kPi * s), 0.5 * std::cos(rot) * s};
}

// Attenuation responds to x/z motion, path length to y/z motion, so some
// activities are indistinguishable from amplitude alone.
constexpr Point kAmplitudeAxis = {0.8, 0.0, 0.6};
constexpr Point kPathAxis = {0.0, 0.8, 0.6};

double project(const Point& p, const Point& axis, double rotation) {
  // Receivers see the workspace rotated about the vertical axis.
  const double c = std::cos(rotation);
  const double s = std::sin(rotation);
  const double x = c * p[0] - s * p[1];
  const double y = s * p[0] + c * p[1];
  return x * axis[0] + y * axis[1] + p[2] * axis[2];
}

/// Normal draw truncated to +-2 sigma.
double bounded_noise(SplitMix64& rng, double stddev) {
  double z = rng.normal();
  while (std::abs(z) > 2.0) z = rng.normal();
  return stddev * z;
}

double reflect(double x, double bound) {
  while (x > bound || x < -bound) x = x > bound ? 2 * bound - x : -2 * bound - x;
  return x;
}

}  // namespace

void SynthConfig::validate() const {
  if (subcarriers < 2 || packets < 1 || channels < 1 || classes < 2 || classes > 255 || samples_per_cell < 0) {
    throw ConfigError("SynthConfig: invalid dimensions");
  }
  if (!(velocity_factors[0] > 0.0 && velocity_factors[0] < velocity_factors[1] &&
        velocity_factors[1] < velocity_factors[2])) {
    throw ConfigError("SynthConfig: velocity factors must be positive and increasing");
  }
  if (noise_std < 0.0 || max_slope < 0.0 || max_offset < 0.0 || max_offset > kPi) {
    throw ConfigError("SynthConfig: invalid noise or impairment range");
  }
}

double amplitude_template(int activity, double tau) { return project(trajectory(activity, tau), kAmplitudeAxis, 0.0); }
double path_template(int activity, double tau) { return project(trajectory(activity, tau), kPathAxis, 0.0); }

double wrap_phase(double x) { return x - 2.0 * kPi * std::ceil((x - kPi) / (2.0 * kPi)); }

SynthSample generate_one(const SynthConfig& cfg, int activity, Velocity velocity, std::size_t index) {
  SplitMix64 rng(derive_seed(cfg.seed, index));
  const int S = cfg.subcarriers;
  const int T = cfg.packets;
  const double factor = cfg.velocity_factors[static_cast<std::size_t>(velocity)] * rng.uniform(0.95, 1.05);
  const double start = rng.uniform(0.0, 0.05);

  SynthSample out;
  out.sample.label = static_cast<std::uint8_t>(activity);
  out.sample.velocity = velocity;
  for (int r = 0; r < cfg.channels; ++r) {
    const double rotation = 0.5 * r;
    const double amp_gain = rng.uniform(0.9, 1.1);
    const double path_gain = rng.uniform(0.9, 1.1);
    const double ripple_freq = rng.uniform(0.5, 1.5);
    const double ripple_phase = rng.uniform(0.0, 2.0 * kPi);

    Vector<double> base(S);    // static multipath profile A0(k)
    Vector<double> weight(S);  // frequency selectivity of the attenuation change
    Vector<double> shape(S);   // path-length response across subcarriers, nonlinear in k
    for (int k = 0; k < S; ++k) {
      const double x = static_cast<double>(k) / S;
      base(k) = 1.0 + 0.1 * std::cos(2.0 * kPi * ripple_freq * x + ripple_phase);
      weight(k) = std::cos(2.0 * kPi * 1.5 * x + rotation);
      shape(k) = x + std::sin(kPi * x);
    }

    Matrix<double> amp(S, T);
    Matrix<double> theta(S, T);
    ComplexCsi<float> measured{Matrix<float>(S, T), Matrix<float>(S, T)};
    TrendParams<double> imp{Vector<double>(T), Vector<double>(T)};
    double alpha = rng.uniform(-cfg.max_slope, cfg.max_slope);
    double beta = rng.uniform(-cfg.max_offset, cfg.max_offset);
    Vector<double> branch(S);
    for (int t = 0; t < T; ++t) {
      if (t > 0) {
        alpha = reflect(alpha + rng.uniform(-0.1, 0.1) * cfg.max_slope, cfg.max_slope);
        beta = beta + rng.uniform(-0.5, 0.5) * cfg.max_offset / kPi;
        if (cfg.max_offset < kPi) {
          beta = reflect(beta, cfg.max_offset);
        } else {
          beta = wrap_phase(beta);
        }
      }
      imp.alpha(t) = alpha;
      imp.beta(t) = beta;
      const double tau = start + factor * static_cast<double>(t) / T;
      const Point p = trajectory(activity, tau);
      const double g = project(p, kAmplitudeAxis, rotation);
      const double d = project(p, kPathAxis, rotation);
      for (int k = 0; k < S; ++k) {
        amp(k, t) = base(k) * (1.0 + 0.3 * amp_gain * g * weight(k));
        theta(k, t) = 2.0 * kPi * path_gain * d * shape(k);
        const double a = std::max(amp(k, t) + bounded_noise(rng, cfg.noise_std), 1e-3);
        const double continuous = theta(k, t) + bounded_noise(rng, cfg.noise_std) + alpha * (k + 1) + beta;
        const double wrapped = wrap_phase(continuous);
        if (t == 0) branch(k) = wrapped - continuous;
        measured.real(k, t) = static_cast<float>(a * std::cos(wrapped));
        measured.imag(k, t) = static_cast<float>(a * std::sin(wrapped));
      }
    }
    out.sample.channels.push_back(std::move(measured));
    out.true_amplitude.push_back(std::move(amp));
    out.true_phase.push_back(std::move(theta));
    out.impairment.push_back(std::move(imp));
    out.branch_offset.push_back(std::move(branch));
  }
  return out;
}

std::vector<SynthSample> generate_with_truth(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<SynthSample> out;
  out.reserve(cfg.total_samples());
  std::size_t index = 0;
  for (int v = 0; v < kNumVelocities; ++v) {
    for (int c = 0; c < cfg.classes; ++c) {
      for (int i = 0; i < cfg.samples_per_cell; ++i) {
        out.push_back(generate_one(cfg, c, static_cast<Velocity>(v), index++));
      }
    }
  }
  return out;
}

std::vector<LabeledSample> generate(const SynthConfig& cfg) {
  auto full = generate_with_truth(cfg);
  std::vector<LabeledSample> out;
  out.reserve(full.size());
  for (auto& s : full) out.push_back(std::move(s.sample));
  return out;
}

LovoSplit lovo_split(const std::vector<LabeledSample>& samples, Velocity held_out) {
  std::array<bool, kNumVelocities> seen{};
  LovoSplit split;
  split.held_out = held_out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto v = static_cast<std::size_t>(samples[i].velocity);
    if (v >= seen.size()) throw DataError("lovo_split: sample " + std::to_string(i) + " has an invalid velocity tag");
    seen[v] = true;
    (samples[i].velocity == held_out ? split.test : split.train).push_back(i);
  }
  for (int v = 0; v < kNumVelocities; ++v) {
    if (!seen[static_cast<std::size_t>(v)]) {
      throw DataError("lovo_split: no samples with velocity " + to_string(static_cast<Velocity>(v)));
    }
  }
  return split;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> carve_validation(
    const std::vector<LabeledSample>& samples, const std::vector<std::size_t>& train, double fraction,
    std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) throw ConfigError("carve_validation: fraction must be in [0, 1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (auto i : train) by_class[samples.at(i).label].push_back(i);
  SplitMix64 rng(seed);
  std::vector<std::size_t> keep;
  std::vector<std::size_t> val;
  for (auto& [label, idx] : by_class) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    auto n_val = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size())));
    if (fraction > 0.0 && n_val == 0 && idx.size() >= 2) n_val = 1;
    val.insert(val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    keep.insert(keep.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  std::sort(val.begin(), val.end());
  return {std::move(keep), std::move(val)};
}

SchemaDescriptor SchemaDescriptor::robofisense() {
  SchemaDescriptor d;
  d.classes = 8;
  d.velocities = 3;
  d.names.assign(kActivityNames.begin(), kActivityNames.end());
  return d;
}

SchemaDescriptor parse_schema(const std::string& text) {
  SchemaDescriptor d;
  d.names.clear();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("schema line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "classes") {
        d.classes = std::stoi(value);
      } else if (key == "velocities") {
        d.velocities = std::stoi(value);
      } else if (key == "names") {
        std::istringstream list(value);
        std::string name;
        while (std::getline(list, name, ',')) d.names.push_back(trim(name));
      } else {
        throw FormatError("schema line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw FormatError("schema line " + std::to_string(lineno) + ": bad value '" + value + "'");
    }
  }
  if (d.classes < 1 || d.classes > 256 || d.velocities < 1 || d.velocities > kNumVelocities) {
    throw FormatError("schema: classes must be in [1,256] and velocities in [1,3]");
  }
  if (!d.names.empty() && static_cast<int>(d.names.size()) != d.classes) {
    throw FormatError("schema: " + std::to_string(d.names.size()) + " names for " + std::to_string(d.classes) +
                      " classes");
  }
  return d;
}

SchemaDescriptor load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schema(ss.str());
}

void validate_samples(const std::vector<LabeledSample>& samples, const SchemaDescriptor& schema) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].label >= schema.classes) {
      throw ValidationError("sample " + std::to_string(i) + ": label " + std::to_string(samples[i].label) +
                            " >= classes " + std::to_string(schema.classes));
    }
    const auto v = static_cast<int>(samples[i].velocity);
    if (v >= schema.velocities) {
      throw ValidationError("sample " + std::to_string(i) + ": velocity " + std::to_string(v) + " not in [0, " +
                            std::to_string(schema.velocities) + ")");
    }
  }
}

std::vector<LabeledSample> ingest_external(const std::filesystem::path& path, const SchemaDescriptor& schema) {
  auto samples = read_csib(path);
  validate_samples(samples, schema);
  return samples;
}

}  // namespace csifuse
