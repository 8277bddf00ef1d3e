#pragma once

#include <string>
#include <vector>

#include "csifuse/csi.hpp"

namespace csifuse {

enum class PreprocMethod { kAmpOnly, kPhaseUnwrapped, kAmpPhaseUnwrapped, kPhaseSanitized, kAmpPhaseSanitized };

inline constexpr PreprocMethod kAllPreprocMethods[] = {
    PreprocMethod::kAmpOnly, PreprocMethod::kPhaseUnwrapped, PreprocMethod::kAmpPhaseUnwrapped,
    PreprocMethod::kPhaseSanitized, PreprocMethod::kAmpPhaseSanitized};

std::string to_string(PreprocMethod m);

struct BenchRow {
  PreprocMethod method = PreprocMethod::kAmpOnly;
  double mean_ms = 0.0;  // per sample
  double sd_ms = 0.0;    // sample standard deviation over runs
  double ratio = 1.0;    // mean / amp-only mean
};

struct BenchResult {
  std::vector<BenchRow> rows;
  /// Per-sample time of a pipeline that only touches the loaded data.
  double noop_ms = 0.0;
  int iters = 0;
  std::size_t samples = 0;

  const BenchRow& row(PreprocMethod m) const;
};

/// Runs one preprocessing method over a sample and returns a checksum of the
/// produced channels.
double run_preprocessing(const LabeledSample& sample, PreprocMethod method);

/// Times every method over the whole (pre-loaded) dataset on the calling
/// thread: one warm-up pass, then `iters` timed passes.
BenchResult bench_preprocessing(const std::vector<LabeledSample>& data, int iters = 5);

/// method,mean_ms,sd_ms,ratio
std::string render_bench_csv(const BenchResult& result);

}  // namespace csifuse
