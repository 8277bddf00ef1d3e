#include <doctest.h>

#include <cmath>

#include "csifuse/train.hpp"

using namespace csifuse;

namespace {

Matrix<double> random_matrix(Eigen::Index r, Eigen::Index c, SplitMix64& rng, double scale = 1.0) {
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
  return m;
}

template <typename Scalar>
PreparedSample<Scalar> random_sample(InputConfig config, Eigen::Index s, Eigen::Index t, int label, SplitMix64& rng,
                                     int receivers = 1) {
  PreparedSample<Scalar> out;
  out.label = label;
  out.input.config = config;
  for (int r = 0; r < receivers * channel_multiplier(config); ++r) {
    out.input.channels.push_back(random_matrix(s, t, rng).cast<Scalar>());
  }
  return out;
}

template <typename Scalar>
SequenceBatch<Scalar> batch_of(const std::vector<PreparedSample<Scalar>>& samples, ModelKind kind) {
  return make_batch<Scalar>(pointers(samples), kind);
}

}  // namespace

TEST_CASE("modality dropout: p = 0 passes both streams") {
  SplitMix64 rng(1);
  const Matrix<double> a = random_matrix(4, 6, rng), p = random_matrix(4, 6, rng);
  const auto [a2, p2, m] = apply_modality_dropout(a, p, 0.0, rng, true);
  CHECK(a2 == a);
  CHECK(p2 == p);
  CHECK(m == MaskedStream::kNone);
}

TEST_CASE("modality dropout: p = 1 masks exactly one stream, chosen uniformly") {
  SplitMix64 rng(2);
  const Matrix<double> a = random_matrix(4, 6, rng), p = random_matrix(4, 6, rng);
  int amp = 0, phase = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto [a2, p2, m] = apply_modality_dropout(a, p, 1.0, rng, true);
    REQUIRE(m != MaskedStream::kNone);
    if (m == MaskedStream::kAmplitude) {
      ++amp;
      REQUIRE(a2.isZero(0.0));
      REQUIRE(p2 == p);
    } else {
      ++phase;
      REQUIRE(p2.isZero(0.0));
      REQUIRE(a2 == a);
    }
  }
  CHECK(std::abs(amp - 5000) <= 150);
  CHECK(std::abs(phase - 5000) <= 150);
}

TEST_CASE("modality dropout: per-stream rate within the binomial 3 sigma band") {
  SplitMix64 rng(3);
  const double p = 0.05;
  const int n = 40000;
  int amp = 0, phase = 0;
  for (int i = 0; i < n; ++i) {
    const auto m = draw_modality_mask(p, rng);
    amp += m == MaskedStream::kAmplitude;
    phase += m == MaskedStream::kPhase;
  }
  const double q = p / 2;
  const double band = 3.0 * std::sqrt(q * (1 - q) / n);
  CHECK(std::abs(amp / double(n) - q) <= band);
  CHECK(std::abs(phase / double(n) - q) <= band);
}

TEST_CASE("modality dropout: mode and range errors") {
  const Matrix<double> a = Matrix<double>::Ones(2, 2);
  SplitMix64 rng(4);
  CHECK_THROWS_AS(apply_modality_dropout(a, a, 0.05, rng, false), ModeError);
  CHECK_THROWS_AS(apply_modality_dropout(a, a, 1.5, rng, true), ConfigError);
  CHECK_THROWS_AS(apply_modality_dropout(a, a, -0.1, rng, true), ConfigError);
}

TEST_CASE("GF-BiLSTM rejects single-channel configurations") {
  const ModelShape shape{4, 1, 3, 2};
  CHECK_THROWS_AS(make_model<float>(ModelKind::kGfBilstm, InputConfig::kPhaseOnlyUnwrapped, shape), ConfigError);
  CHECK_THROWS_AS(make_model<float>(ModelKind::kGfBilstm, InputConfig::kAmplitudeOnly, shape), ConfigError);
  CHECK_NOTHROW(make_model<float>(ModelKind::kGfBilstm, InputConfig::kAmpPlusUnwrapped, shape));
  CHECK_NOTHROW(make_model<float>(ModelKind::kGfBilstm, InputConfig::kAmpPlusSanitized, shape));
  for (auto c : kAllInputConfigs) CHECK_NOTHROW(make_model<float>(ModelKind::kBaseline, c, shape));
}

TEST_CASE("make_batch: column t*B + b holds time t of sample b") {
  SplitMix64 rng(5);
  std::vector<PreparedSample<double>> s;
  for (int i = 0; i < 3; ++i) s.push_back(random_sample<double>(InputConfig::kAmpPlusSanitized, 4, 5, i, rng, 2));
  const auto gf = batch_of(s, ModelKind::kGfBilstm);
  const auto base = batch_of(s, ModelKind::kBaseline);
  CHECK(gf.amplitude.rows() == 8);
  CHECK(base.stacked.rows() == 16);
  CHECK(gf.labels == std::vector<int>{0, 1, 2});
  for (Eigen::Index b = 0; b < 3; ++b) {
    const auto& ch = s[static_cast<std::size_t>(b)].input.channels;
    for (Eigen::Index t = 0; t < 5; ++t) {
      const Eigen::Index col = t * 3 + b;
      CHECK(gf.amplitude.col(col).head(4) == ch[0].col(t));
      CHECK(gf.phase.col(col).head(4) == ch[1].col(t));
      CHECK(gf.amplitude.col(col).tail(4) == ch[2].col(t));
      CHECK(gf.phase.col(col).tail(4) == ch[3].col(t));
      for (int c = 0; c < 4; ++c) CHECK(base.stacked.col(col).segment(4 * c, 4) == ch[static_cast<std::size_t>(c)].col(t));
    }
  }
  std::vector<PreparedSample<double>> ragged = {s[0], random_sample<double>(InputConfig::kAmpPlusSanitized, 4, 6, 0, rng, 2)};
  CHECK_THROWS_AS(batch_of(ragged, ModelKind::kGfBilstm), ShapeError);
}

TEST_CASE("GF-BiLSTM: full-size shape contract and eval determinism") {
  const ModelShape shape{64, 1, 128, 8};
  GfBilstm<float> model(shape);
  SplitMix64 rng(6);
  model.init(rng);
  std::vector<PreparedSample<float>> s = {random_sample<float>(InputConfig::kAmpPlusSanitized, 64, 128, 3, rng)};
  const auto l1 = eval_logits<float>(model, s[0]);
  const auto l2 = eval_logits<float>(model, s[0]);
  CHECK(l1.size() == 8);
  CHECK(l1 == l2);
  CHECK(l1.allFinite());
}

TEST_CASE("GF-BiLSTM: gate range and fusion convexity on the trace") {
  const ModelShape shape{6, 1, 5, 3};
  GfBilstm<double> model(shape);
  SplitMix64 rng(7);
  model.init(rng);
  std::vector<PreparedSample<double>> s;
  for (int i = 0; i < 4; ++i) s.push_back(random_sample<double>(InputConfig::kAmpPlusSanitized, 6, 9, i % 3, rng));
  const auto batch = batch_of(s, ModelKind::kGfBilstm);
  for (bool train : {false, true}) {
    nn::Tape<double> t(false);
    GfTrace tr;
    SplitMix64 masks(8);
    model.forward_traced(t, batch, ForwardOptions{train, 0.2, 0.5}, masks, &tr);
    const auto& g = t.value(tr.gate);
    const auto& z = t.value(tr.fused);
    const auto& ua = t.value(tr.u_amp);
    const auto& up = t.value(tr.u_phase);
    CHECK(g.minCoeff() > 0.0);
    CHECK(g.maxCoeff() < 1.0);
    CHECK((z.array() >= ua.cwiseMin(up).array() - 1e-12).all());
    CHECK((z.array() <= ua.cwiseMax(up).array() + 1e-12).all());
  }
}

TEST_CASE("GF-BiLSTM: logits of a masked sample ignore the masked stream") {
  const ModelShape shape{4, 1, 3, 2};
  GfBilstm<double> model(shape);
  SplitMix64 rng(9);
  model.init(rng);
  std::vector<PreparedSample<double>> s;
  for (int i = 0; i < 16; ++i) s.push_back(random_sample<double>(InputConfig::kAmpPlusSanitized, 4, 5, i % 2, rng));
  auto run = [&](const std::vector<PreparedSample<double>>& samples, GfTrace& tr) {
    nn::Tape<double> t(false);
    SplitMix64 masks(10);
    const Matrix<double> logits =
        t.value(model.forward_traced(t, batch_of(samples, ModelKind::kGfBilstm), ForwardOptions{true, 0.0, 0.9}, masks, &tr));
    return logits;
  };
  GfTrace tr;
  const auto before = run(s, tr);
  auto altered = s;
  int masked = 0;
  for (std::size_t b = 0; b < s.size(); ++b) {
    if (tr.masks[b] == MaskedStream::kNone) continue;
    ++masked;
    const std::size_t ch = tr.masks[b] == MaskedStream::kAmplitude ? 0 : 1;
    altered[b].input.channels[ch] = random_matrix(4, 5, rng, 5.0);
  }
  REQUIRE(masked > 0);
  REQUIRE(masked < 16);
  GfTrace tr2;
  const auto after = run(altered, tr2);
  CHECK(tr2.masks == tr.masks);
  for (std::size_t b = 0; b < s.size(); ++b) {
    const double diff = (before.col(static_cast<Eigen::Index>(b)) - after.col(static_cast<Eigen::Index>(b))).norm();
    if (tr.masks[b] == MaskedStream::kNone) {
      CHECK(diff == 0.0);
    } else {
      CHECK(diff < 1e-12);
    }
  }
  const auto eval_before = eval_logits<double>(model, s[0]);
  altered[0].input.channels[1] = random_matrix(4, 5, rng, 5.0);
  CHECK((eval_before - eval_logits<double>(model, altered[0])).norm() > 1e-6);
}

TEST_CASE("GF-BiLSTM: saturated gate with mirrored streams swaps roles") {
  const ModelShape shape{5, 1, 4, 3};
  GfBilstm<double> model(shape);
  SplitMix64 rng(11);
  model.init(rng);
  model.phase_norm.gamma.value = model.amp_norm.gamma.value;
  model.phase_norm.beta.value = model.amp_norm.beta.value;
  model.phase_lstm = model.amp_lstm;
  model.phase_proj_w.value = model.amp_proj_w.value;
  model.phase_proj_b.value = model.amp_proj_b.value;
  model.gate_w.value.setZero();

  std::vector<PreparedSample<double>> s = {random_sample<double>(InputConfig::kAmpPlusSanitized, 5, 7, 0, rng)};
  std::vector<PreparedSample<double>> swapped = s;
  std::swap(swapped[0].input.channels[0], swapped[0].input.channels[1]);

  model.gate_b.value.setConstant(40.0);
  const auto amp_wins = eval_logits<double>(model, s[0]);
  model.gate_b.value.setConstant(-40.0);
  const auto phase_wins = eval_logits<double>(model, swapped[0]);
  CHECK((amp_wins - phase_wins).cwiseAbs().maxCoeff() < 1e-9);

  const auto phase_wins_unswapped = eval_logits<double>(model, s[0]);
  CHECK((amp_wins - phase_wins_unswapped).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("baseline BiLSTM: shape contract and eval determinism for every configuration") {
  SplitMix64 rng(12);
  for (auto config : kAllInputConfigs) {
    const ModelShape shape{8, 2, 4, 5};
    auto model = make_model<float>(ModelKind::kBaseline, config, shape);
    model->init(rng);
    const auto s = random_sample<float>(config, 8, 6, 1, rng, 2);
    const auto l1 = eval_logits<float>(*model, s);
    CHECK(l1.size() == 5);
    CHECK(l1 == eval_logits<float>(*model, s));
    const auto wrong = random_sample<float>(config, 8, 6, 1, rng, 1);
    CHECK_THROWS_AS(eval_logits<float>(*model, wrong), ShapeError);
  }
}

TEST_CASE("predict: tie-break, normalisation, shift invariance") {
  const auto [cls, p] = predict_from_logits<double>(Vector<double>::Constant(8, 0.3));
  CHECK(cls == 0);
  CHECK(std::abs(p.sum() - 1.0) < 1e-6);

  SplitMix64 rng(13);
  for (int i = 0; i < 50; ++i) {
    Vector<double> l = random_matrix(8, 1, rng, 3.0);
    const auto [c1, p1] = predict_from_logits<double>(l);
    const auto [c2, p2] = predict_from_logits<double>((l.array() + rng.normal(0, 20)).matrix());
    CHECK(c1 == c2);
    CHECK(std::abs(p1.sum() - 1.0) < 1e-6);
    CHECK((p1 - p2).cwiseAbs().maxCoeff() < 1e-9);
  }

  GfBilstm<float> model(ModelShape{4, 1, 3, 2});
  model.init(rng);
  const auto s = random_sample<float>(InputConfig::kAmpPlusSanitized, 5, 6, 0, rng);
  CHECK_THROWS_AS(predict<float>(model, s), ShapeError);
}

TEST_CASE("checkpoint: model round trip through bytes") {
  SplitMix64 rng(14);
  for (auto [kind, config] : {std::pair{ModelKind::kGfBilstm, InputConfig::kAmpPlusUnwrapped},
                              std::pair{ModelKind::kBaseline, InputConfig::kAmplitudeOnly}}) {
    const ModelShape shape{6, 1, 4, 3};
    auto model = make_model<float>(kind, config, shape);
    model->init(rng);
    const auto bytes = nn::encode_checkpoint(checkpoint_tensors(*model, config));
    auto loaded = model_from_checkpoint<float>(nn::decode_checkpoint(bytes));
    CHECK(loaded.config == config);
    CHECK(loaded.model->kind() == kind);
    CHECK(loaded.model->shape().hidden == 4);
    CHECK(nn::encode_checkpoint(checkpoint_tensors(*loaded.model, loaded.config)) == bytes);
    const auto s = random_sample<float>(config, 6, 5, 2, rng);
    CHECK(eval_logits<float>(*model, s) == eval_logits<float>(*loaded.model, s));
  }
  GfBilstm<float> bare(ModelShape{4, 1, 3, 2});
  const auto tensors = nn::to_named_tensors(bare.parameters());
  CHECK_THROWS_AS(model_from_checkpoint<float>(tensors), FormatError);
}
