#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csifuse/datagen.hpp"
#include "csifuse/train.hpp"

namespace csifuse {

/// Settings shared by every cell of a LOVO experiment.
struct ExperimentConfig {
  TrainConfig train;
  Eigen::Index hidden = 128;
  int classes = 8;
  /// Share of each training split moved to validation, stratified by class.
  double val_fraction = 0.1;
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  void validate() const;
};

/// One (held-out velocity, input configuration, model) cell, pooled over seeds.
struct CellResult {
  Velocity held_out = Velocity::V3;
  InputConfig config = InputConfig::kAmpPlusSanitized;
  ModelKind model = ModelKind::kBaseline;
  std::vector<std::uint64_t> seeds;
  std::vector<double> seed_accuracy;  // percent, one per seed
  std::vector<int> best_epochs;
  /// Summed over seeds [true x predicted]; rows sum to seeds x class counts.
  Eigen::MatrixXi confusion;
  /// 100 * trace(confusion) / sum(confusion), the seed mean for equal test sets.
  double accuracy = 0.0;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::vector<std::uint64_t> seeds;

  const CellResult* find(Velocity held_out, InputConfig config, ModelKind model) const;
  /// Mean cell accuracy over all held-out velocities present for (model, config).
  double mean_accuracy(ModelKind model, InputConfig config) const;
};

/// Preprocessed copies of `data` in `config`, index-aligned with `data`.
std::vector<PreparedSample<float>> prepare_dataset(const std::vector<LabeledSample>& data, InputConfig config);

/// Trains on the two other velocities (minus a validation carve-out) and
/// tests on `held_out`, once per seed. `prepared` must come from
/// prepare_dataset(data, config).
CellResult run_lovo(const std::vector<LabeledSample>& data, const std::vector<PreparedSample<float>>& prepared,
                    ModelKind model, InputConfig config, Velocity held_out, const ExperimentConfig& exp);
CellResult run_lovo(const std::vector<LabeledSample>& data, ModelKind model, InputConfig config, Velocity held_out,
                    const ExperimentConfig& exp);

using ProgressFn = std::function<void(const CellResult&)>;

/// All held-out velocities x all four configurations for the baseline and the
/// two-channel configurations for GF-BiLSTM.
ExperimentResult run_full_grid(const std::vector<LabeledSample>& data, const ExperimentConfig& exp,
                               const ProgressFn& progress = {});

/// Markdown table in the layout of the LOVO results table; GF-BiLSTM
/// single-channel cells are rendered as "−".
std::string render_markdown(const ExperimentResult& result);
/// held_out,model,config,seed,accuracy rows; seed "mean" carries the cell value.
std::string render_csv(const ExperimentResult& result);

}  // namespace csifuse
