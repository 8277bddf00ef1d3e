#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csifuse/bench.hpp"
#include "csifuse/csib.hpp"
#include "csifuse/figure.hpp"
#include "csifuse/harness.hpp"

using namespace csifuse;

namespace {

Velocity parse_holdout(const std::string& token) {
  if (token == "v1" || token == "V1") return Velocity::V1;
  if (token == "v2" || token == "V2") return Velocity::V2;
  if (token == "v3" || token == "V3") return Velocity::V3;
  throw UsageError("unknown velocity '" + token + "' (expected v1, v2 or v3)");
}

InputConfig parse_config(const std::string& token) {
  if (auto c = parse_input_config(token)) return *c;
  throw UsageError("unknown input configuration '" + token + "' (expected phase, amp, amp-unw or amp-san)");
}

ModelKind parse_model(const std::string& token) {
  if (auto m = parse_model_kind(token)) return *m;
  throw UsageError("unknown model '" + token + "' (expected baseline or gf)");
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("invalid seed '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("--seeds needs at least one value");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

std::string confusion_csv(const Eigen::MatrixXi& m) {
  std::ostringstream out;
  out << "true\\pred";
  for (Eigen::Index c = 0; c < m.cols(); ++c) out << "," << c;
  out << "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << r;
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << "," << m(r, c);
    out << "\n";
  }
  return out.str();
}

std::string fixed2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

struct TrainFlags {
  int hidden = 128;
  double lr = 1e-4;
  double weight_decay = 2e-5;
  double dropout = 0.2;
  double modality_dropout = 0.05;
  int batch = 8;
  int epochs = 150;
  int patience = 15;
  double val_fraction = 0.1;

  void add_to(CLI::App* app) {
    app->add_option("--hidden", hidden, "LSTM hidden width")->capture_default_str();
    app->add_option("--lr", lr, "AdamW learning rate")->capture_default_str();
    app->add_option("--weight-decay", weight_decay, "AdamW decoupled weight decay")->capture_default_str();
    app->add_option("--dropout", dropout, "Dropout probability")->capture_default_str();
    app->add_option("--modality-dropout", modality_dropout, "Stream masking probability")->capture_default_str();
    app->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
    app->add_option("--epochs", epochs, "Maximum epochs")->capture_default_str();
    app->add_option("--patience", patience, "Early-stopping patience (<= 0 disables)")->capture_default_str();
    app->add_option("--val-fraction", val_fraction, "Validation share of the training split")->capture_default_str();
  }

  TrainConfig train_config() const {
    TrainConfig tc;
    tc.lr = lr;
    tc.weight_decay = weight_decay;
    tc.dropout = dropout;
    tc.modality_dropout = modality_dropout;
    tc.batch_size = batch;
    tc.max_epochs = epochs;
    tc.patience = patience;
    return tc;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"CSI activity recognition: preprocessing, BiLSTM / GF-BiLSTM training and LOVO evaluation"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate the synthetic dataset");
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  SynthConfig synth;
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output CSIB file")->required();
  gen->add_option("--samples-per-cell", synth.samples_per_cell, "Samples per (class, velocity)")->capture_default_str();
  gen->add_option("--channels", synth.channels, "Receivers per sample")->capture_default_str();
  gen->add_option("--subcarriers", synth.subcarriers, "Subcarriers S")->capture_default_str();
  gen->add_option("--packets", synth.packets, "Packets T")->capture_default_str();
  gen->add_option("--noise", synth.noise_std, "Noise standard deviation")->capture_default_str();

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "Write model-ready channels (real part, imag = 0) as CSIB");
  std::string prep_in, prep_out, prep_config;
  prep->add_option("--in", prep_in, "Input CSIB")->required();
  prep->add_option("--config", prep_config, "phase | amp | amp-unw | amp-san")->required();
  prep->add_option("--out", prep_out, "Output CSIB")->required();

  // train
  auto* trn = app.add_subcommand("train", "Train one model on a LOVO split");
  std::string trn_in, trn_holdout, trn_config, trn_model = "gf", trn_ckpt, trn_history;
  std::uint64_t trn_seed = 1;
  TrainFlags trn_flags;
  trn->add_option("--in", trn_in, "Input CSIB")->required();
  trn->add_option("--holdout", trn_holdout, "Held-out velocity v1 | v2 | v3")->required();
  trn->add_option("--config", trn_config, "phase | amp | amp-unw | amp-san")->required();
  trn->add_option("--model", trn_model, "baseline | gf")->capture_default_str();
  trn->add_option("--seed", trn_seed, "Seed for initialisation, shuffling and validation carve-out")
      ->capture_default_str();
  trn->add_option("--ckpt", trn_ckpt, "Output checkpoint (GFBW)")->required();
  trn->add_option("--history", trn_history, "Write epoch,train_loss,val_acc CSV");
  trn_flags.add_to(trn);

  // eval
  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint on the held-out velocity");
  std::string evl_in, evl_ckpt, evl_holdout, evl_out;
  evl->add_option("--in", evl_in, "Input CSIB")->required();
  evl->add_option("--ckpt", evl_ckpt, "Checkpoint (GFBW)")->required();
  evl->add_option("--holdout", evl_holdout, "Held-out velocity v1 | v2 | v3")->required();
  evl->add_option("--out", evl_out, "Also write the confusion matrix CSV here");

  // grid
  auto* grd = app.add_subcommand("grid", "Full LOVO grid over input configurations and models");
  std::string grd_in, grd_seeds = "1,2,3", grd_out, grd_csv;
  TrainFlags grd_flags;
  grd->add_option("--in", grd_in, "Input CSIB")->required();
  grd->add_option("--seeds", grd_seeds, "Comma-separated seeds")->capture_default_str();
  grd->add_option("--out", grd_out, "Markdown results table")->required();
  grd->add_option("--csv", grd_csv, "CSV twin (default: <out>.csv)");
  grd_flags.add_to(grd);

  // bench
  auto* bch = app.add_subcommand("bench", "Time the preprocessing variants");
  std::string bch_in, bch_out;
  int bch_iters = 5;
  bch->add_option("--in", bch_in, "Input CSIB")->required();
  bch->add_option("--iters", bch_iters, "Timed runs")->capture_default_str();
  bch->add_option("--out", bch_out, "Output CSV")->required();

  // fig
  auto* fig = app.add_subcommand("fig", "Export heatmap or overlay data for one sample");
  std::string fig_in, fig_kind, fig_stage, fig_out;
  std::size_t fig_sample = 0, fig_channel = 0;
  int fig_snapshots = 8;
  fig->add_option("--in", fig_in, "Input CSIB")->required();
  fig->add_option("--sample", fig_sample, "Sample index")->required();
  fig->add_option("--kind", fig_kind, "heatmap | overlay")->required();
  fig->add_option("--stage", fig_stage, "amplitude | raw | unwrapped | sanitized")->required();
  fig->add_option("--out", fig_out, "Output CSV")->required();
  fig->add_option("--channel", fig_channel, "Receiver index")->capture_default_str();
  fig->add_option("--snapshots", fig_snapshots, "Overlay snapshot count")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  if (gen->parsed()) {
    synth.seed = gen_seed;
    const auto data = generate(synth);
    write_csib(data, gen_out);
    std::cout << "wrote " << data.size() << " samples to " << gen_out << "\n";
  } else if (prep->parsed()) {
    const auto config = parse_config(prep_config);
    const auto data = read_csib(prep_in);
    if (data.empty()) throw DataError("preprocess: no samples in " + prep_in);
    std::vector<LabeledSample> out;
    out.reserve(data.size());
    for (const auto& s : data) {
      const auto input = preprocess<float>(s, config);
      LabeledSample p;
      p.label = s.label;
      p.velocity = s.velocity;
      for (const auto& ch : input.channels) p.channels.push_back({ch, Matrix<float>::Zero(ch.rows(), ch.cols())});
      out.push_back(std::move(p));
    }
    write_csib(out, prep_out);
    std::cout << "wrote " << out.size() << " samples (" << out.front().channels.size() << " channels) to "
              << prep_out << "\n";
  } else if (trn->parsed()) {
    const auto held_out = parse_holdout(trn_holdout);
    const auto config = parse_config(trn_config);
    const auto kind = parse_model(trn_model);
    require_supported(kind, config);
    const auto data = read_csib(trn_in);
    validate_samples(data, SchemaDescriptor::robofisense());
    const auto split = lovo_split(data, held_out);
    const auto prepared = prepare_dataset(data, config);
    const auto [train_idx, val_idx] =
        carve_validation(data, split.train, trn_flags.val_fraction, derive_seed(trn_seed, 1));
    std::vector<const PreparedSample<float>*> train_set, val_set;
    for (auto i : train_idx) train_set.push_back(&prepared[i]);
    for (auto i : val_idx) val_set.push_back(&prepared[i]);

    ModelShape shape{data.front().subcarriers(), static_cast<Eigen::Index>(data.front().channels.size()),
                     trn_flags.hidden, 8};
    auto model = make_model<float>(kind, config, shape);
    SplitMix64 init_rng(derive_seed(trn_seed, 2));
    model->init(init_rng);
    auto tc = trn_flags.train_config();
    tc.seed = derive_seed(trn_seed, 3);
    const auto result = train(*model, train_set, val_set, tc);
    nn::save_checkpoint(trn_ckpt, checkpoint_tensors(*model, config));
    if (!trn_history.empty()) {
      std::ostringstream h;
      h << "epoch,train_loss,val_acc\n";
      for (const auto& r : result.history) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.2f\n", r.epoch, r.train_loss, r.val_accuracy);
        h << buf;
      }
      write_text(trn_history, h.str());
    }
    std::cout << display_name(kind) << " " << cli_name(config) << ": " << result.history.size() << " epochs, best epoch "
              << result.best_epoch << ", val accuracy " << fixed2(result.best_val_accuracy) << "%\n";
  } else if (evl->parsed()) {
    const auto held_out = parse_holdout(evl_holdout);
    auto loaded = model_from_checkpoint<float>(nn::load_checkpoint(evl_ckpt));
    const auto data = read_csib(evl_in);
    validate_samples(data, SchemaDescriptor::robofisense());
    const auto split = lovo_split(data, held_out);
    std::vector<PreparedSample<float>> test;
    for (auto i : split.test) test.push_back({preprocess<float>(data[i], loaded.config), data[i].label});
    const auto ev = evaluate(*loaded.model, pointers(test));
    const auto csv = confusion_csv(ev.confusion);
    std::cout << "accuracy," << fixed2(ev.accuracy) << "\n" << csv;
    if (!evl_out.empty()) write_text(evl_out, csv);
  } else if (grd->parsed()) {
    ExperimentConfig exp;
    exp.train = grd_flags.train_config();
    exp.hidden = grd_flags.hidden;
    exp.val_fraction = grd_flags.val_fraction;
    exp.seeds = parse_seeds(grd_seeds);
    const auto data = read_csib(grd_in);
    validate_samples(data, SchemaDescriptor::robofisense());
    const auto result = run_full_grid(data, exp, [](const CellResult& c) {
      std::cerr << to_string(c.held_out) << " " << display_name(c.model) << " " << cli_name(c.config) << ": "
                << fixed2(c.accuracy) << "%\n";
    });
    write_text(grd_out, render_markdown(result));
    write_text(grd_csv.empty() ? grd_out + ".csv" : grd_csv, render_csv(result));
    std::cout << render_markdown(result);
  } else if (bch->parsed()) {
    const auto data = read_csib(bch_in);
    const auto result = bench_preprocessing(data, bch_iters);
    const auto csv = render_bench_csv(result);
    write_text(bch_out, csv);
    std::cout << csv;
  } else if (fig->parsed()) {
    const auto kind = parse_figure_kind(fig_kind);
    const auto stage = parse_figure_stage(fig_stage);
    if (!kind) throw UsageError("unknown figure kind '" + fig_kind + "'");
    if (!stage) throw UsageError("unknown figure stage '" + fig_stage + "'");
    const auto data = read_csib(fig_in);
    if (fig_sample >= data.size()) {
      throw UsageError("--sample " + std::to_string(fig_sample) + " out of range (" + std::to_string(data.size()) +
                       " samples)");
    }
    export_figure_data(data[fig_sample], *kind, *stage, fig_out, fig_snapshots, fig_channel);
  }
  return static_cast<int>(ExitCode::kSuccess);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  }
}
