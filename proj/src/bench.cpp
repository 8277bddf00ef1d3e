#include "csifuse/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "csifuse/phase.hpp"

namespace csifuse {
namespace {

using Clock = std::chrono::steady_clock;

double per_sample_ms(Clock::duration d, std::size_t n) {
  return std::chrono::duration<double, std::milli>(d).count() / static_cast<double>(n);
}

struct Stats {
  double mean = 0.0;
  double sd = 0.0;
};

Stats stats(const std::vector<double>& xs) {
  Stats s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

template <typename Fn>
std::vector<double> time_runs(const std::vector<LabeledSample>& data, int iters, Fn&& fn) {
  volatile double sink = 0.0;
  for (const auto& s : data) sink = sink + fn(s);
  std::vector<double> ms;
  for (int i = 0; i < iters; ++i) {
    const auto t0 = Clock::now();
    double acc = 0.0;
    for (const auto& s : data) acc += fn(s);
    ms.push_back(per_sample_ms(Clock::now() - t0, data.size()));
    sink = sink + acc;
  }
  return ms;
}

}  // namespace

std::string to_string(PreprocMethod m) {
  switch (m) {
    case PreprocMethod::kAmpOnly: return "Amp-only";
    case PreprocMethod::kPhaseUnwrapped: return "Phase-only (Unw)";
    case PreprocMethod::kAmpPhaseUnwrapped: return "Amp+Phase (Unw)";
    case PreprocMethod::kPhaseSanitized: return "Phase-only (San)";
    case PreprocMethod::kAmpPhaseSanitized: return "Amp+Phase (San)";
  }
  return "?";
}

const BenchRow& BenchResult::row(PreprocMethod m) const {
  for (const auto& r : rows) {
    if (r.method == m) return r;
  }
  throw DataError("BenchResult: method not benchmarked");
}

double run_preprocessing(const LabeledSample& sample, PreprocMethod method) {
  double checksum = 0.0;
  for (const auto& rx : sample.channels) {
    if (method == PreprocMethod::kAmpOnly) {
      const Matrix<float> amp = (rx.real.array().square() + rx.imag.array().square()).sqrt().matrix();
      checksum += amp(0, 0);
      continue;
    }
    auto [amp, raw] = decompose<float, double>(rx);
    const bool keep_amp =
        method == PreprocMethod::kAmpPhaseUnwrapped || method == PreprocMethod::kAmpPhaseSanitized;
    const bool sanitized = method == PreprocMethod::kPhaseSanitized || method == PreprocMethod::kAmpPhaseSanitized;
    auto phase = unwrap_temporal(raw);
    if (sanitized) phase = sanitize(phase).first;
    const Matrix<float> out = phase.values.cast<float>();
    checksum += out(0, 0);
    if (keep_amp) {
      const Matrix<float> a = amp.values.cast<float>();
      checksum += a(0, 0);
    }
  }
  return checksum;
}

BenchResult bench_preprocessing(const std::vector<LabeledSample>& data, int iters) {
  if (data.empty()) throw DataError("bench_preprocessing: empty dataset");
  if (iters < 1) throw ConfigError("bench_preprocessing: iters must be >= 1");
  BenchResult result;
  result.iters = iters;
  result.samples = data.size();
  for (const auto m : kAllPreprocMethods) {
    const auto s = stats(time_runs(data, iters, [m](const LabeledSample& x) { return run_preprocessing(x, m); }));
    result.rows.push_back({m, s.mean, s.sd, 1.0});
  }
  const double base = result.rows.front().mean_ms;
  for (auto& r : result.rows) r.ratio = r.mean_ms / base;
  result.noop_ms = stats(time_runs(data, iters, [](const LabeledSample& x) {
                           return static_cast<double>(x.channels.front().real(0, 0));
                         })).mean;
  return result;
}

std::string render_bench_csv(const BenchResult& result) {
  std::ostringstream out;
  out << "method,mean_ms,sd_ms,ratio\n";
  char buf[160];
  for (const auto& r : result.rows) {
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.2f\n", to_string(r.method).c_str(), r.mean_ms, r.sd_ms, r.ratio);
    out << buf;
  }
  return out.str();
}

}  // namespace csifuse
