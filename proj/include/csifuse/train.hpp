#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "csifuse/model.hpp"
#include "csifuse/nn/adamw.hpp"

namespace csifuse {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 2e-5;
  double dropout = 0.2;
  double modality_dropout = 0.05;
  int batch_size = 8;
  int max_epochs = 150;
  /// Epochs without a validation improvement before stopping; <= 0 disables.
  int patience = 15;
  /// Hard cap on optimiser steps; < 0 means unlimited.
  long max_steps = -1;
  std::uint64_t seed = 1;

  void validate() const {
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("TrainConfig: dropout must be in [0, 1)");
    if (modality_dropout < 0.0 || modality_dropout >= 1.0) {
      throw ConfigError("TrainConfig: modality_dropout must be in [0, 1)");
    }
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (max_epochs < 0) throw ConfigError("TrainConfig: max_epochs must be >= 0");
    if (!(lr > 0.0) || weight_decay < 0.0) throw ConfigError("TrainConfig: invalid optimiser settings");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;  // percent
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0: initial parameters were kept
  double best_val_accuracy = 0.0;
  long steps = 0;
};

/// Confusion matrix [true x predicted] and accuracy in percent.
struct Evaluation {
  Eigen::MatrixXi confusion;
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

/// Eval-mode accuracy over `samples`, processed in chunks of `chunk`.
template <typename Scalar>
Evaluation evaluate(SequenceClassifier<Scalar>& model, const std::vector<const PreparedSample<Scalar>*>& samples,
                    int chunk = 32) {
  const auto classes = model.shape().classes;
  Evaluation ev;
  ev.confusion = Eigen::MatrixXi::Zero(classes, classes);
  if (samples.empty()) return ev;
  SplitMix64 unused(0);
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(chunk)) {
    const std::size_t n = std::min(samples.size() - start, static_cast<std::size_t>(chunk));
    std::span<const PreparedSample<Scalar>* const> part(samples.data() + start, n);
    const auto batch = make_batch<Scalar>(part, model.kind());
    nn::Tape<Scalar> tape(false);
    const nn::Var logits = model.forward(tape, batch, ForwardOptions{}, unused);
    const auto& L = tape.value(logits);
    for (Eigen::Index b = 0; b < L.cols(); ++b) {
      const int y = batch.labels[static_cast<std::size_t>(b)];
      if (y < 0 || y >= classes) throw LabelError("evaluate: label " + std::to_string(y) + " out of range");
      const int pred = nn::argmax_lowest(L.col(b));
      ev.confusion(y, pred) += 1;
      loss_sum += static_cast<double>(nn::softmax_cross_entropy<Scalar>(L.col(b), y).first);
    }
  }
  ev.accuracy = 100.0 * ev.confusion.trace() / static_cast<double>(ev.confusion.sum());
  ev.mean_loss = loss_sum / static_cast<double>(samples.size());
  return ev;
}

template <typename Scalar>
std::vector<const PreparedSample<Scalar>*> pointers(const std::vector<PreparedSample<Scalar>>& samples) {
  std::vector<const PreparedSample<Scalar>*> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(&s);
  return out;
}

/// Mini-batch AdamW over shuffled epochs with early stopping on validation
/// accuracy (equal accuracy counts as an improvement when the validation
/// loss is lower). The model ends up holding the best-validation parameters,
/// or the last ones when `val_set` is empty. Single-threaded and fully
/// determined by cfg.seed and the model's initial parameters.
template <typename Scalar>
TrainResult train(SequenceClassifier<Scalar>& model, const std::vector<const PreparedSample<Scalar>*>& train_set,
                  const std::vector<const PreparedSample<Scalar>*>& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: empty training set");
  TrainResult result;
  if (cfg.max_epochs == 0 || cfg.max_steps == 0) return result;

  auto params = model.parameters();
  nn::AdamWState<Scalar> opt(params);
  const nn::AdamWConfig adam{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
  const ForwardOptions fwd{true, cfg.dropout, cfg.modality_dropout};
  SplitMix64 rng(cfg.seed);

  std::vector<Matrix<Scalar>> best;
  auto snapshot = [&] {
    best.clear();
    for (const auto* p : params) best.push_back(p->value);
  };
  snapshot();
  double best_val_loss = std::numeric_limits<double>::infinity();
  if (!val_set.empty()) {
    const auto initial = evaluate(model, val_set);
    result.best_val_accuracy = initial.accuracy;
    best_val_loss = initial.mean_loss;
  }

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const PreparedSample<Scalar>*> batch_ptrs;
  int since_best = 0;
  bool out_of_steps = false;
  for (int epoch = 1; epoch <= cfg.max_epochs && !out_of_steps; ++epoch) {
    // Fisher-Yates with the seeded stream.
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      if (cfg.max_steps >= 0 && result.steps >= cfg.max_steps) {
        out_of_steps = true;
        break;
      }
      const std::size_t n = std::min(order.size() - start, static_cast<std::size_t>(cfg.batch_size));
      batch_ptrs.clear();
      for (std::size_t i = 0; i < n; ++i) batch_ptrs.push_back(train_set[order[start + i]]);
      const auto batch = make_batch<Scalar>(batch_ptrs, model.kind());
      model.zero_grad();
      nn::Tape<Scalar> tape(true);
      const nn::Var logits = model.forward(tape, batch, fwd, rng);
      const nn::Var loss = nn::softmax_cross_entropy(tape, logits, std::span<const int>(batch.labels));
      const double value = static_cast<double>(tape.value(loss)(0, 0));
      if (!std::isfinite(value)) {
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(result.steps + 1));
      }
      tape.backward(loss);
      try {
        nn::adamw_step(opt, params, adam);
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(result.steps + 1) + ")");
      }
      ++result.steps;
      loss_sum += value;
      ++batches;
    }
    if (batches == 0) break;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / batches;
    Evaluation val;
    if (!val_set.empty()) val = evaluate(model, val_set);
    rec.val_accuracy = val.accuracy;
    result.history.push_back(rec);
    const bool improved = val_set.empty() || val.accuracy > result.best_val_accuracy ||
                          (val.accuracy == result.best_val_accuracy && val.mean_loss < best_val_loss);
    if (improved) {
      result.best_val_accuracy = val.accuracy;
      result.best_epoch = epoch;
      best_val_loss = val.mean_loss;
      snapshot();
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  return result;
}

}  // namespace csifuse
