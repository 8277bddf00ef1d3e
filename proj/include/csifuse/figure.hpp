#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

#include "csifuse/csi.hpp"

namespace csifuse {

enum class FigureKind { kHeatmap, kOverlay };
enum class FigureStage { kAmplitude, kRaw, kUnwrapped, kSanitized };

std::optional<FigureKind> parse_figure_kind(std::string_view token);
std::optional<FigureStage> parse_figure_stage(std::string_view token);

/// S x T matrix of one processing stage for receiver `channel`.
Matrix<double> figure_stage(const LabeledSample& sample, FigureStage stage, std::size_t channel = 0);

/// Evenly spaced packet indices, first and last included.
std::vector<Eigen::Index> snapshot_times(Eigen::Index packets, int count);

/// Heatmap: S rows x T columns. Overlay: one row per snapshot, S columns.
/// Plain comma-separated numbers without a header.
Matrix<double> figure_data(const LabeledSample& sample, FigureKind kind, FigureStage stage, int snapshots = 8,
                           std::size_t channel = 0);
void export_figure_data(const LabeledSample& sample, FigureKind kind, FigureStage stage,
                        const std::filesystem::path& path, int snapshots = 8, std::size_t channel = 0);

}  // namespace csifuse
