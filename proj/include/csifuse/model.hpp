#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "csifuse/nn/checkpoint.hpp"
#include "csifuse/nn/functional.hpp"
#include "csifuse/nn/lstm.hpp"
#include "csifuse/phase.hpp"

namespace csifuse {

enum class ModelKind : std::uint8_t { kBaseline = 0, kGfBilstm = 1 };

inline std::string_view cli_name(ModelKind k) { return k == ModelKind::kBaseline ? "baseline" : "gf"; }
inline std::string_view display_name(ModelKind k) { return k == ModelKind::kBaseline ? "BiLSTM" : "GF-BiLSTM"; }

inline std::optional<ModelKind> parse_model_kind(std::string_view token) {
  if (token == "baseline") return ModelKind::kBaseline;
  if (token == "gf") return ModelKind::kGfBilstm;
  return std::nullopt;
}

/// The gated-fusion model needs an amplitude and a phase stream.
inline void require_supported(ModelKind kind, InputConfig config) {
  if (kind == ModelKind::kGfBilstm && channel_multiplier(config) != 2) {
    throw ConfigError("GF-BiLSTM needs a two-channel input configuration, got '" + std::string(cli_name(config)) + "'");
  }
}

/// Architecture hyperparameters shared by both models.
struct ModelShape {
  Eigen::Index subcarriers = 64;
  Eigen::Index receivers = 1;
  Eigen::Index hidden = 128;
  Eigen::Index classes = 8;
};

/// Stochastic regularisation applied in train mode only.
struct ForwardOptions {
  bool train = false;
  double dropout = 0.2;
  double modality_dropout = 0.05;
};

enum class MaskedStream : std::uint8_t { kNone, kAmplitude, kPhase };

/// Per-sample stream masking decision: with probability p one of the two
/// streams, chosen uniformly, is masked. Two draws when masking happens, one
/// otherwise.
inline MaskedStream draw_modality_mask(double p, SplitMix64& rng) {
  if (p <= 0.0) return MaskedStream::kNone;
  if (rng.uniform() >= p) return MaskedStream::kNone;
  return rng.uniform() < 0.5 ? MaskedStream::kAmplitude : MaskedStream::kPhase;
}

/// Zeroes one normalised stream of a sample across all time steps and
/// features with probability p. Training only.
template <typename Scalar>
std::tuple<Matrix<Scalar>, Matrix<Scalar>, MaskedStream> apply_modality_dropout(const Matrix<Scalar>& amp_norm,
                                                                               const Matrix<Scalar>& phase_norm,
                                                                               double p, SplitMix64& rng,
                                                                               bool train_mode) {
  if (!train_mode) throw ModeError("apply_modality_dropout: only valid in train mode");
  if (p < 0.0 || p > 1.0) throw ConfigError("apply_modality_dropout: p must be in [0, 1]");
  const MaskedStream m = draw_modality_mask(p, rng);
  Matrix<Scalar> a = amp_norm;
  Matrix<Scalar> ph = phase_norm;
  if (m == MaskedStream::kAmplitude) a.setZero();
  if (m == MaskedStream::kPhase) ph.setZero();
  return {std::move(a), std::move(ph), m};
}

/// Inverted-dropout mask: entries 1/(1-p) with probability 1-p, else 0.
template <typename Scalar>
Matrix<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, SplitMix64& rng) {
  Matrix<Scalar> m(rows, cols);
  const auto keep = static_cast<Scalar>(1.0 / (1.0 - p));
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform() < p ? Scalar(0) : keep;
  }
  return m;
}

/// A mini-batch in sequence layout: column t*B + b is time t of sample b.
template <typename Scalar>
struct SequenceBatch {
  Matrix<Scalar> amplitude;  // GF-BiLSTM: amplitude stream [(S*R) x (T*B)]
  Matrix<Scalar> phase;      // GF-BiLSTM: phase stream
  Matrix<Scalar> stacked;    // baseline: all channels [(M*S) x (T*B)]
  std::vector<int> labels;
  Eigen::Index batch = 0;
  Eigen::Index steps = 0;
};

/// A labelled, preprocessed sample ready for batching.
template <typename Scalar>
struct PreparedSample {
  ModelInput<Scalar> input;
  int label = 0;
};

namespace detail {

/// Copies selected channels of each sample, stacked along rows, into the
/// interleaved batch layout.
template <typename Scalar>
Matrix<Scalar> interleave(std::span<const PreparedSample<Scalar>* const> samples, std::span<const std::size_t> channels) {
  const auto& first = samples.front()->input;
  const Eigen::Index s = first.subcarriers();
  const Eigen::Index steps = first.packets();
  const auto batch = static_cast<Eigen::Index>(samples.size());
  const auto rows = s * static_cast<Eigen::Index>(channels.size());
  Matrix<Scalar> out(rows, steps * batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto& in = samples[static_cast<std::size_t>(b)]->input;
    if (in.subcarriers() != s || in.packets() != steps || in.channels.size() != first.channels.size()) {
      throw ShapeError("batch: samples differ in shape");
    }
    Eigen::Map<Matrix<Scalar>, 0, Eigen::OuterStride<>> view(out.data() + b * rows, rows, steps,
                                                             Eigen::OuterStride<>(rows * batch));
    for (std::size_t c = 0; c < channels.size(); ++c) {
      view.middleRows(static_cast<Eigen::Index>(c) * s, s) = in.channels[channels[c]];
    }
  }
  return out;
}

}  // namespace detail

/// Builds the batch tensors a model of `kind` consumes.
template <typename Scalar>
SequenceBatch<Scalar> make_batch(std::span<const PreparedSample<Scalar>* const> samples, ModelKind kind) {
  if (samples.empty()) throw DataError("make_batch: empty batch");
  const auto& first = samples.front()->input;
  if (first.channels.empty()) throw ShapeError("make_batch: sample has no channels");
  SequenceBatch<Scalar> b;
  b.batch = static_cast<Eigen::Index>(samples.size());
  b.steps = first.packets();
  for (const auto* s : samples) b.labels.push_back(s->label);
  if (kind == ModelKind::kGfBilstm) {
    require_supported(kind, first.config);
    std::vector<std::size_t> amp_ch;
    std::vector<std::size_t> phase_ch;
    for (std::size_t c = 0; c < first.channels.size(); c += 2) {
      amp_ch.push_back(c);
      phase_ch.push_back(c + 1);
    }
    b.amplitude = detail::interleave<Scalar>(samples, amp_ch);
    b.phase = detail::interleave<Scalar>(samples, phase_ch);
  } else {
    std::vector<std::size_t> all(first.channels.size());
    for (std::size_t c = 0; c < all.size(); ++c) all[c] = c;
    b.stacked = detail::interleave<Scalar>(samples, all);
  }
  return b;
}

/// Common interface of the two sequence classifiers.
template <typename Scalar>
class SequenceClassifier {
 public:
  virtual ~SequenceClassifier() = default;
  virtual ModelKind kind() const = 0;
  virtual const ModelShape& shape() const = 0;
  /// Parameters sorted by name.
  virtual nn::ParamRefs<Scalar> parameters() = 0;
  virtual void init(SplitMix64& rng) = 0;
  /// Logits [C x B].
  virtual nn::Var forward(nn::Tape<Scalar>& tape, const SequenceBatch<Scalar>& batch, const ForwardOptions& opts,
                          SplitMix64& rng) = 0;

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }
};

namespace detail {

template <typename Scalar>
nn::Var maybe_dropout(nn::Tape<Scalar>& t, nn::Var x, const ForwardOptions& opts, SplitMix64& rng) {
  if (!opts.train || opts.dropout <= 0.0) return x;
  const auto& v = t.value(x);
  return nn::mask(t, x, dropout_mask<Scalar>(v.rows(), v.cols(), opts.dropout, rng));
}

template <typename Scalar>
nn::Var dense(nn::Tape<Scalar>& t, nn::Param<Scalar>& w, nn::Param<Scalar>& b, nn::Var x) {
  return nn::linear(t, t.param(w), t.param(b), x);
}

template <typename Scalar>
nn::Var norm(nn::Tape<Scalar>& t, nn::LayerNormParams<Scalar>& p, nn::Var x, Eigen::Index groups) {
  return nn::layer_norm(t, x, t.param(p.gamma), t.param(p.beta), p.epsilon, groups);
}

}  // namespace detail

/// Intermediate values of a GF-BiLSTM forward pass, for inspection.
struct GfTrace {
  nn::Var amp_norm, phase_norm, u_amp, u_phase, gate, fused, pooled, logits;
  std::vector<MaskedStream> masks;
};

/// Two-stream gated-fusion BiLSTM:
///   per-time LN on each stream -> (train) modality dropout -> one BiLSTM per
///   stream -> ReLU projection to width h -> per-time sigmoid gate mixing the
///   two projections -> two stacked BiLSTMs -> temporal mean -> ReLU MLP ->
///   logits.
template <typename Scalar>
class GfBilstm final : public SequenceClassifier<Scalar> {
 public:
  nn::LayerNormParams<Scalar> amp_norm, phase_norm;
  nn::BiLstmParams<Scalar> amp_lstm, phase_lstm;
  nn::Param<Scalar> amp_proj_w, amp_proj_b, phase_proj_w, phase_proj_b;
  nn::Param<Scalar> gate_w, gate_b;
  nn::BiLstmParams<Scalar> fusion_lstm1, fusion_lstm2;
  nn::Param<Scalar> head1_w, head1_b, head2_w, head2_b;

  explicit GfBilstm(const ModelShape& shape) : shape_(shape) {
    const Eigen::Index f = shape.subcarriers * shape.receivers;
    const Eigen::Index h = shape.hidden;
    if (f < 1 || h < 1 || shape.classes < 2) throw ConfigError("GfBilstm: invalid shape");
    amp_norm = nn::LayerNormParams<Scalar>("amp_norm", f);
    phase_norm = nn::LayerNormParams<Scalar>("phase_norm", f);
    amp_lstm = nn::BiLstmParams<Scalar>("amp_lstm", f, h);
    phase_lstm = nn::BiLstmParams<Scalar>("phase_lstm", f, h);
    amp_proj_w = nn::Param<Scalar>("amp_proj.weight", h, 2 * h);
    amp_proj_b = nn::Param<Scalar>::vector("amp_proj.bias", h);
    phase_proj_w = nn::Param<Scalar>("phase_proj.weight", h, 2 * h);
    phase_proj_b = nn::Param<Scalar>::vector("phase_proj.bias", h);
    gate_w = nn::Param<Scalar>("gate.weight", h, 2 * h);
    gate_b = nn::Param<Scalar>::vector("gate.bias", h);
    fusion_lstm1 = nn::BiLstmParams<Scalar>("fusion_lstm1", h, h);
    fusion_lstm2 = nn::BiLstmParams<Scalar>("fusion_lstm2", 2 * h, h);
    head1_w = nn::Param<Scalar>("head1.weight", 2 * h, 2 * h);
    head1_b = nn::Param<Scalar>::vector("head1.bias", 2 * h);
    head2_w = nn::Param<Scalar>("head2.weight", shape.classes, 2 * h);
    head2_b = nn::Param<Scalar>::vector("head2.bias", shape.classes);
  }

  ModelKind kind() const override { return ModelKind::kGfBilstm; }
  const ModelShape& shape() const override { return shape_; }

  nn::ParamRefs<Scalar> parameters() override {
    nn::ParamRefs<Scalar> out;
    amp_norm.collect(out);
    phase_norm.collect(out);
    amp_lstm.collect(out);
    phase_lstm.collect(out);
    fusion_lstm1.collect(out);
    fusion_lstm2.collect(out);
    for (auto* p : {&amp_proj_w, &amp_proj_b, &phase_proj_w, &phase_proj_b, &gate_w, &gate_b, &head1_w, &head1_b,
                    &head2_w, &head2_b}) {
      out.push_back(p);
    }
    nn::sort_by_name(out);
    return out;
  }

  void init(SplitMix64& rng) override {
    amp_norm.gamma.value.setOnes();
    amp_norm.beta.value.setZero();
    phase_norm.gamma.value.setOnes();
    phase_norm.beta.value.setZero();
    amp_lstm.init(rng);
    phase_lstm.init(rng);
    nn::init_dense(amp_proj_w, amp_proj_b, rng);
    nn::init_dense(phase_proj_w, phase_proj_b, rng);
    nn::init_dense(gate_w, gate_b, rng);
    fusion_lstm1.init(rng);
    fusion_lstm2.init(rng);
    nn::init_dense(head1_w, head1_b, rng);
    nn::init_dense(head2_w, head2_b, rng);
  }

  nn::Var forward(nn::Tape<Scalar>& t, const SequenceBatch<Scalar>& batch, const ForwardOptions& opts,
                  SplitMix64& rng) override {
    return forward_traced(t, batch, opts, rng, nullptr);
  }

  nn::Var forward_traced(nn::Tape<Scalar>& t, const SequenceBatch<Scalar>& batch, const ForwardOptions& opts,
                         SplitMix64& rng, GfTrace* trace) {
    if (batch.amplitude.size() == 0 || batch.phase.size() == 0) throw ShapeError("GfBilstm: both streams are required");
    if (batch.amplitude.cols() != batch.phase.cols() || batch.amplitude.rows() != batch.phase.rows()) {
      throw ShapeError("GfBilstm: amplitude and phase streams differ in shape");
    }
    if (batch.amplitude.rows() != shape_.subcarriers * shape_.receivers) {
      throw ShapeError("GfBilstm: stream width " + std::to_string(batch.amplitude.rows()) + ", expected " +
                       std::to_string(shape_.subcarriers * shape_.receivers));
    }
    const Eigen::Index B = batch.batch;
    using detail::dense;
    nn::Var a = detail::norm(t, amp_norm, t.constant(batch.amplitude), shape_.receivers);
    nn::Var p = detail::norm(t, phase_norm, t.constant(batch.phase), shape_.receivers);
    GfTrace local;
    GfTrace& tr = trace != nullptr ? *trace : local;
    tr.amp_norm = a;
    tr.phase_norm = p;
    tr.masks.assign(static_cast<std::size_t>(B), MaskedStream::kNone);
    if (opts.train && opts.modality_dropout > 0.0) {
      bool any_amp = false;
      bool any_phase = false;
      for (auto& m : tr.masks) {
        m = draw_modality_mask(opts.modality_dropout, rng);
        any_amp |= m == MaskedStream::kAmplitude;
        any_phase |= m == MaskedStream::kPhase;
      }
      auto stream_mask = [&](MaskedStream which) {
        Matrix<Scalar> m = Matrix<Scalar>::Ones(batch.amplitude.rows(), batch.amplitude.cols());
        for (Eigen::Index s = 0; s < batch.steps; ++s) {
          for (Eigen::Index b = 0; b < B; ++b) {
            if (tr.masks[static_cast<std::size_t>(b)] == which) m.col(s * B + b).setZero();
          }
        }
        return m;
      };
      if (any_amp) a = nn::mask(t, a, stream_mask(MaskedStream::kAmplitude));
      if (any_phase) p = nn::mask(t, p, stream_mask(MaskedStream::kPhase));
    }
    nn::Var ha = detail::maybe_dropout(t, nn::bilstm(t, amp_lstm, a, B), opts, rng);
    nn::Var hp = detail::maybe_dropout(t, nn::bilstm(t, phase_lstm, p, B), opts, rng);
    tr.u_amp = nn::relu(t, dense(t, amp_proj_w, amp_proj_b, ha));
    tr.u_phase = nn::relu(t, dense(t, phase_proj_w, phase_proj_b, hp));
    tr.gate = nn::sigmoid(t, dense(t, gate_w, gate_b, nn::concat_rows(t, tr.u_amp, tr.u_phase)));
    tr.fused = nn::gate_mix(t, tr.gate, tr.u_amp, tr.u_phase);
    nn::Var h1 = detail::maybe_dropout(t, nn::bilstm(t, fusion_lstm1, tr.fused, B), opts, rng);
    nn::Var h2 = nn::bilstm(t, fusion_lstm2, h1, B);
    tr.pooled = nn::mean_pool_time(t, h2, B);
    nn::Var q = detail::maybe_dropout(t, nn::relu(t, dense(t, head1_w, head1_b, tr.pooled)), opts, rng);
    tr.logits = dense(t, head2_w, head2_b, q);
    return tr.logits;
  }

 private:
  ModelShape shape_;
};

/// Single-stream comparison model: all channels of a time step flattened
/// into one feature vector -> LN (per channel block) -> 3 stacked BiLSTMs ->
/// temporal mean -> the same two-layer head.
template <typename Scalar>
class BaselineBilstm final : public SequenceClassifier<Scalar> {
 public:
  nn::LayerNormParams<Scalar> input_norm;
  nn::BiLstmParams<Scalar> lstm1, lstm2, lstm3;
  nn::Param<Scalar> head1_w, head1_b, head2_w, head2_b;

  BaselineBilstm(const ModelShape& shape, Eigen::Index channels) : shape_(shape), channels_(channels) {
    const Eigen::Index f = shape.subcarriers * channels;
    const Eigen::Index h = shape.hidden;
    if (f < 1 || h < 1 || shape.classes < 2) throw ConfigError("BaselineBilstm: invalid shape");
    input_norm = nn::LayerNormParams<Scalar>("input_norm", f);
    lstm1 = nn::BiLstmParams<Scalar>("lstm1", f, h);
    lstm2 = nn::BiLstmParams<Scalar>("lstm2", 2 * h, h);
    lstm3 = nn::BiLstmParams<Scalar>("lstm3", 2 * h, h);
    head1_w = nn::Param<Scalar>("head1.weight", 2 * h, 2 * h);
    head1_b = nn::Param<Scalar>::vector("head1.bias", 2 * h);
    head2_w = nn::Param<Scalar>("head2.weight", shape.classes, 2 * h);
    head2_b = nn::Param<Scalar>::vector("head2.bias", shape.classes);
  }

  ModelKind kind() const override { return ModelKind::kBaseline; }
  const ModelShape& shape() const override { return shape_; }
  Eigen::Index channels() const { return channels_; }

  nn::ParamRefs<Scalar> parameters() override {
    nn::ParamRefs<Scalar> out;
    input_norm.collect(out);
    lstm1.collect(out);
    lstm2.collect(out);
    lstm3.collect(out);
    for (auto* p : {&head1_w, &head1_b, &head2_w, &head2_b}) out.push_back(p);
    nn::sort_by_name(out);
    return out;
  }

  void init(SplitMix64& rng) override {
    input_norm.gamma.value.setOnes();
    input_norm.beta.value.setZero();
    lstm1.init(rng);
    lstm2.init(rng);
    lstm3.init(rng);
    nn::init_dense(head1_w, head1_b, rng);
    nn::init_dense(head2_w, head2_b, rng);
  }

  nn::Var forward(nn::Tape<Scalar>& t, const SequenceBatch<Scalar>& batch, const ForwardOptions& opts,
                  SplitMix64& rng) override {
    if (batch.stacked.rows() != shape_.subcarriers * channels_) {
      throw ShapeError("BaselineBilstm: input width " + std::to_string(batch.stacked.rows()) + ", expected " +
                       std::to_string(shape_.subcarriers * channels_));
    }
    const Eigen::Index B = batch.batch;
    nn::Var x = detail::norm(t, input_norm, t.constant(batch.stacked), channels_);
    nn::Var h = detail::maybe_dropout(t, nn::bilstm(t, lstm1, x, B), opts, rng);
    h = detail::maybe_dropout(t, nn::bilstm(t, lstm2, h, B), opts, rng);
    h = nn::bilstm(t, lstm3, h, B);
    nn::Var pooled = nn::mean_pool_time(t, h, B);
    nn::Var q = detail::maybe_dropout(t, nn::relu(t, detail::dense(t, head1_w, head1_b, pooled)), opts, rng);
    return detail::dense(t, head2_w, head2_b, q);
  }

 private:
  ModelShape shape_;
  Eigen::Index channels_;
};

/// Creates the model for `kind` and input configuration.
template <typename Scalar>
std::unique_ptr<SequenceClassifier<Scalar>> make_model(ModelKind kind, InputConfig config, const ModelShape& shape) {
  require_supported(kind, config);
  if (kind == ModelKind::kGfBilstm) return std::make_unique<GfBilstm<Scalar>>(shape);
  return std::make_unique<BaselineBilstm<Scalar>>(shape, shape.receivers * channel_multiplier(config));
}

/// Logits [C] of one sample, eval mode.
template <typename Scalar>
Vector<Scalar> eval_logits(SequenceClassifier<Scalar>& model, const PreparedSample<Scalar>& sample) {
  const PreparedSample<Scalar>* one[] = {&sample};
  const auto batch = make_batch<Scalar>(one, model.kind());
  nn::Tape<Scalar> tape(false);
  SplitMix64 unused(0);
  const nn::Var logits = model.forward(tape, batch, ForwardOptions{}, unused);
  return tape.value(logits).col(0);
}

/// Most probable class (lowest index on ties) and the softmax distribution.
template <typename Scalar>
std::pair<int, Vector<Scalar>> predict_from_logits(const Vector<Scalar>& logits) {
  const Scalar m = logits.maxCoeff();
  const Eigen::Array<Scalar, Eigen::Dynamic, 1> e = (logits.array() - m).exp();
  Vector<Scalar> p = (e / e.sum()).matrix();
  return {nn::argmax_lowest(logits), std::move(p)};
}

template <typename Scalar>
std::pair<int, Vector<Scalar>> predict(SequenceClassifier<Scalar>& model, const PreparedSample<Scalar>& sample) {
  const PreparedSample<Scalar>& s = sample;
  if (s.input.subcarriers() != model.shape().subcarriers) {
    throw ShapeError("predict: sample has " + std::to_string(s.input.subcarriers()) + " subcarriers, model expects " +
                     std::to_string(model.shape().subcarriers));
  }
  return predict_from_logits<Scalar>(eval_logits(model, s));
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// Model parameters plus metadata tensors describing how to rebuild it.
template <typename Scalar>
std::vector<nn::NamedTensor> checkpoint_tensors(SequenceClassifier<Scalar>& model, InputConfig config) {
  auto tensors = nn::to_named_tensors(model.parameters());
  const auto& s = model.shape();
  tensors.push_back({"meta.input_config", {1}, {static_cast<float>(config)}});
  tensors.push_back({"meta.model_kind", {1}, {static_cast<float>(model.kind())}});
  tensors.push_back({"meta.shape", {4},
                     {static_cast<float>(s.subcarriers), static_cast<float>(s.receivers), static_cast<float>(s.hidden),
                      static_cast<float>(s.classes)}});
  return tensors;
}

template <typename Scalar>
struct LoadedModel {
  std::unique_ptr<SequenceClassifier<Scalar>> model;
  InputConfig config = InputConfig::kAmpPlusSanitized;
};

template <typename Scalar>
LoadedModel<Scalar> model_from_checkpoint(const std::vector<nn::NamedTensor>& tensors) {
  const auto* cfg = nn::find_tensor(tensors, "meta.input_config");
  const auto* kind = nn::find_tensor(tensors, "meta.model_kind");
  const auto* shp = nn::find_tensor(tensors, "meta.shape");
  if (cfg == nullptr || kind == nullptr || shp == nullptr || cfg->data.size() != 1 || kind->data.size() != 1 ||
      shp->data.size() != 4) {
    throw FormatError("checkpoint: missing model metadata");
  }
  const auto config_index = static_cast<int>(cfg->data[0]);
  const auto kind_index = static_cast<int>(kind->data[0]);
  if (config_index < 0 || config_index > 3 || kind_index < 0 || kind_index > 1) {
    throw FormatError("checkpoint: invalid model metadata");
  }
  ModelShape shape{static_cast<Eigen::Index>(shp->data[0]), static_cast<Eigen::Index>(shp->data[1]),
                   static_cast<Eigen::Index>(shp->data[2]), static_cast<Eigen::Index>(shp->data[3])};
  LoadedModel<Scalar> out;
  out.config = static_cast<InputConfig>(config_index);
  out.model = make_model<Scalar>(static_cast<ModelKind>(kind_index), out.config, shape);
  nn::assign_named_tensors(out.model->parameters(), tensors);
  return out;
}

}  // namespace csifuse
