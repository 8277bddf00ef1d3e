#include "csifuse/figure.hpp"

#include <cstdio>
#include <fstream>

#include "csifuse/phase.hpp"

namespace csifuse {

std::optional<FigureKind> parse_figure_kind(std::string_view token) {
  if (token == "heatmap") return FigureKind::kHeatmap;
  if (token == "overlay") return FigureKind::kOverlay;
  return std::nullopt;
}

std::optional<FigureStage> parse_figure_stage(std::string_view token) {
  if (token == "amplitude") return FigureStage::kAmplitude;
  if (token == "raw") return FigureStage::kRaw;
  if (token == "unwrapped") return FigureStage::kUnwrapped;
  if (token == "sanitized") return FigureStage::kSanitized;
  return std::nullopt;
}

Matrix<double> figure_stage(const LabeledSample& sample, FigureStage stage, std::size_t channel) {
  if (channel >= sample.channels.size()) {
    throw InputError("figure: sample has " + std::to_string(sample.channels.size()) + " channels, requested " +
                     std::to_string(channel));
  }
  auto [amp, raw] = decompose<float, double>(sample.channels[channel]);
  switch (stage) {
    case FigureStage::kAmplitude: return std::move(amp.values);
    case FigureStage::kRaw: return std::move(raw.values);
    case FigureStage::kUnwrapped: return unwrap_temporal(raw).values;
    case FigureStage::kSanitized: return sanitize(unwrap_temporal(raw)).first.values;
  }
  throw UsageError("figure: invalid stage");
}

std::vector<Eigen::Index> snapshot_times(Eigen::Index packets, int count) {
  if (count < 1 || packets < 1) throw UsageError("figure: need at least one snapshot and one packet");
  std::vector<Eigen::Index> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(count == 1 ? 0 : (static_cast<Eigen::Index>(i) * (packets - 1)) / (count - 1));
  }
  return out;
}

Matrix<double> figure_data(const LabeledSample& sample, FigureKind kind, FigureStage stage, int snapshots,
                           std::size_t channel) {
  Matrix<double> grid = figure_stage(sample, stage, channel);
  if (kind == FigureKind::kHeatmap) return grid;
  if (kind != FigureKind::kOverlay) throw UsageError("figure: invalid kind");
  const auto times = snapshot_times(grid.cols(), snapshots);
  Matrix<double> out(static_cast<Eigen::Index>(times.size()), grid.rows());
  for (std::size_t i = 0; i < times.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = grid.col(times[i]).transpose();
  return out;
}

void export_figure_data(const LabeledSample& sample, FigureKind kind, FigureStage stage,
                        const std::filesystem::path& path, int snapshots, std::size_t channel) {
  const auto data = figure_data(sample, kind, stage, snapshots, channel);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[32];
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", data(r, c));
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace csifuse
