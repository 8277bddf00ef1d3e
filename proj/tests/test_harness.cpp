#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "csifuse/bench.hpp"
#include "csifuse/figure.hpp"
#include "csifuse/harness.hpp"

using namespace csifuse;

namespace {

/// Two classes, opposite amplitude ramps across subcarriers, all velocities.
std::vector<LabeledSample> separable_set(int per_cell, std::uint64_t seed, Eigen::Index s = 8, Eigen::Index t = 12) {
  SplitMix64 rng(seed);
  std::vector<LabeledSample> out;
  for (int v = 0; v < kNumVelocities; ++v) {
    for (int label = 0; label < 2; ++label) {
      for (int i = 0; i < per_cell; ++i) {
        LabeledSample smp;
        smp.label = static_cast<std::uint8_t>(label);
        smp.velocity = static_cast<Velocity>(v);
        ComplexCsi<float> csi(s, t);
        for (Eigen::Index k = 0; k < s; ++k) {
          for (Eigen::Index j = 0; j < t; ++j) {
            const double ramp = label == 0 ? static_cast<double>(k) : static_cast<double>(s - 1 - k);
            const double a = 1.0 + ramp + rng.normal(0.0, 0.1);
            const double ph = rng.uniform(-3.0, 3.0);
            csi.real(k, j) = static_cast<float>(a * std::cos(ph));
            csi.imag(k, j) = static_cast<float>(a * std::sin(ph));
          }
        }
        smp.channels.push_back(std::move(csi));
        out.push_back(std::move(smp));
      }
    }
  }
  return out;
}

ExperimentConfig quick_experiment() {
  ExperimentConfig e;
  e.hidden = 6;
  e.classes = 2;
  e.seeds = {1, 2};
  e.train.lr = 1e-2;
  e.train.max_epochs = 15;
  e.train.patience = 5;
  e.train.batch_size = 4;
  return e;
}

/// Nearest-centroid accuracy on amplitude features, trained on the other velocities.
double nearest_centroid_lovo(const std::vector<LabeledSample>& data, Velocity held_out) {
  const auto split = lovo_split(data, held_out);
  auto feature = [&](std::size_t i) -> Eigen::VectorXd {
    return decompose<float, double>(data[i].channels[0]).first.values.reshaped();
  };
  std::vector<Eigen::VectorXd> c(2, Eigen::VectorXd::Zero(feature(0).size()));
  std::vector<int> n(2, 0);
  for (auto i : split.train) {
    c[data[i].label] += feature(i);
    ++n[data[i].label];
  }
  for (int k = 0; k < 2; ++k) c[static_cast<std::size_t>(k)] /= n[static_cast<std::size_t>(k)];
  int correct = 0;
  for (auto i : split.test) {
    const auto f = feature(i);
    const int pred = (f - c[0]).squaredNorm() <= (f - c[1]).squaredNorm() ? 0 : 1;
    correct += pred == data[i].label;
  }
  return 100.0 * correct / static_cast<double>(split.test.size());
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> cells_of(const std::string& row) {
  std::vector<std::string> out;
  std::istringstream in(row);
  std::string cell;
  std::getline(in, cell, '|');
  while (std::getline(in, cell, '|')) {
    const auto b = cell.find_first_not_of(' ');
    const auto e = cell.find_last_not_of(' ');
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

TEST_CASE("run_lovo: separable toy set reaches 100%, matching a nearest-centroid cross-check") {
  const auto data = separable_set(6, 1);
  const auto exp = quick_experiment();
  for (auto held_out : {Velocity::V1, Velocity::V3}) {
    CHECK(nearest_centroid_lovo(data, held_out) == 100.0);
    const auto cell = run_lovo(data, ModelKind::kBaseline, InputConfig::kAmplitudeOnly, held_out, exp);
    CHECK(cell.accuracy == 100.0);
    CHECK(cell.seed_accuracy == std::vector<double>{100.0, 100.0});
  }
}

TEST_CASE("run_lovo: confusion bookkeeping") {
  const auto data = separable_set(4, 2);
  auto exp = quick_experiment();
  exp.train.max_epochs = 2;
  const auto cell = run_lovo(data, ModelKind::kGfBilstm, InputConfig::kAmpPlusSanitized, Velocity::V2, exp);
  CHECK(cell.seeds == exp.seeds);
  CHECK(cell.confusion.sum() == 2 * 8);
  CHECK(cell.confusion.row(0).sum() == 2 * 4);
  CHECK(cell.confusion.row(1).sum() == 2 * 4);
  CHECK(cell.accuracy == doctest::Approx(100.0 * cell.confusion.trace() / cell.confusion.sum()));
  const double mean = (cell.seed_accuracy[0] + cell.seed_accuracy[1]) / 2;
  CHECK(cell.accuracy == doctest::Approx(mean));
  CHECK(cell.accuracy >= 0.0);
  CHECK(cell.accuracy <= 100.0);
}

TEST_CASE("run_lovo: same seeds give an identical cell") {
  const auto data = separable_set(3, 3);
  auto exp = quick_experiment();
  exp.train.max_epochs = 3;
  const auto a = run_lovo(data, ModelKind::kBaseline, InputConfig::kAmpPlusUnwrapped, Velocity::V1, exp);
  const auto b = run_lovo(data, ModelKind::kBaseline, InputConfig::kAmpPlusUnwrapped, Velocity::V1, exp);
  CHECK(a.confusion == b.confusion);
  CHECK(a.seed_accuracy == b.seed_accuracy);
  CHECK(a.best_epochs == b.best_epochs);
}

TEST_CASE("run_lovo: errors") {
  auto data = separable_set(2, 4);
  const auto exp = quick_experiment();
  CHECK_THROWS_AS(run_lovo(data, ModelKind::kGfBilstm, InputConfig::kAmplitudeOnly, Velocity::V1, exp), ConfigError);
  CHECK_THROWS_AS(run_lovo(data, ModelKind::kGfBilstm, InputConfig::kPhaseOnlyUnwrapped, Velocity::V1, exp), ConfigError);
  auto no_v2 = data;
  std::erase_if(no_v2, [](const auto& s) { return s.velocity == Velocity::V2; });
  CHECK_THROWS_AS(run_lovo(no_v2, ModelKind::kBaseline, InputConfig::kAmplitudeOnly, Velocity::V1, exp), DataError);
  auto bad_label = data;
  bad_label[0].label = 5;
  CHECK_THROWS_AS(run_lovo(bad_label, ModelKind::kBaseline, InputConfig::kAmplitudeOnly, Velocity::V1, exp), LabelError);
  auto bad_exp = exp;
  bad_exp.seeds.clear();
  CHECK_THROWS_AS(run_lovo(data, ModelKind::kBaseline, InputConfig::kAmplitudeOnly, Velocity::V1, bad_exp), ConfigError);
}

TEST_CASE("run_full_grid: cell layout, markdown and CSV") {
  const auto data = separable_set(2, 5);
  auto exp = quick_experiment();
  exp.seeds = {7};
  exp.train.max_epochs = 1;
  std::vector<std::string> seen;
  const auto result = run_full_grid(data, exp, [&](const CellResult& c) {
    seen.push_back(to_string(c.held_out) + std::string(cli_name(c.config)) + std::string(cli_name(c.model)));
  });
  CHECK(result.cells.size() == 3 * (4 + 2));
  CHECK(seen.size() == result.cells.size());
  for (auto v : {Velocity::V1, Velocity::V2, Velocity::V3}) {
    for (auto c : kAllInputConfigs) {
      CHECK(result.find(v, c, ModelKind::kBaseline) != nullptr);
      CHECK((result.find(v, c, ModelKind::kGfBilstm) != nullptr) == (channel_multiplier(c) == 2));
    }
  }

  const auto md = render_markdown(result);
  const auto lines = lines_of(md);
  REQUIRE(lines.size() >= 2 + 6 + 2);
  CHECK(lines[0] == "| Train | Test | Model | 1 | 2 | 3 | 4 |");
  int populated = 0;
  const std::string dash = "−";
  for (std::size_t r = 2; r < 8; ++r) {
    const auto cells = cells_of(lines[r]);
    REQUIRE(cells.size() == 7);
    const bool gf = cells[2] == "GF-BiLSTM";
    CHECK((r % 2 == 1) == gf);
    for (std::size_t c = 3; c < 7; ++c) {
      if (gf && c < 5) {
        CHECK(cells[c] == dash);
      } else {
        CHECK(cells[c] != dash);
        ++populated;
      }
    }
  }
  CHECK(populated == 3 * (4 + 2));
  CHECK(cells_of(lines[2])[0] == "V1&V2");
  CHECK(cells_of(lines[2])[1] == "V3");
  CHECK(cells_of(lines[6])[1] == "V1");
  CHECK(md.find("Seeds: 7") != std::string::npos);

  const auto csv = lines_of(render_csv(result));
  CHECK(csv[0] == "held_out,model,config,seed,accuracy");
  CHECK(csv.size() == 1 + 18 * 2);
  CHECK(render_markdown(result) == md);
}

TEST_CASE("render_markdown: never prints a GF-BiLSTM number for single-channel configurations") {
  ExperimentResult r;
  r.seeds = {1};
  for (auto v : {Velocity::V1, Velocity::V2, Velocity::V3}) {
    for (auto c : kAllInputConfigs) {
      for (auto m : {ModelKind::kBaseline, ModelKind::kGfBilstm}) {
        CellResult cell;
        cell.held_out = v;
        cell.config = c;
        cell.model = m;
        cell.accuracy = 12.5;
        r.cells.push_back(cell);
      }
    }
  }
  const auto lines = lines_of(render_markdown(r));
  for (std::size_t i = 2; i < 10; ++i) {
    const auto cells = cells_of(lines[i]);
    if (cells[2] != "GF-BiLSTM") continue;
    CHECK(cells[3] == "−");
    CHECK(cells[4] == "−");
    CHECK(cells[5] == "12.50");
  }
  CHECK(r.mean_accuracy(ModelKind::kBaseline, InputConfig::kAmplitudeOnly) == doctest::Approx(12.5));
}

TEST_CASE("bench_preprocessing: ratios, ordering and errors") {
  SynthConfig c;
  c.samples_per_cell = 1;
  auto data = generate(c);
  data.resize(8);
  const auto r = bench_preprocessing(data, 5);
  REQUIRE(r.rows.size() == 5);
  CHECK(r.iters == 5);
  CHECK(r.samples == 8);
  CHECK(r.row(PreprocMethod::kAmpOnly).ratio == 1.0);
  for (const auto& row : r.rows) {
    CHECK(row.mean_ms > 0.0);
    CHECK(row.sd_ms >= 0.0);
    CHECK(row.ratio == doctest::Approx(row.mean_ms / r.row(PreprocMethod::kAmpOnly).mean_ms));
  }
  CHECK(r.row(PreprocMethod::kAmpPhaseSanitized).mean_ms > r.row(PreprocMethod::kAmpOnly).mean_ms);
  const auto csv = lines_of(render_bench_csv(r));
  CHECK(csv.size() == 6);
  CHECK(csv[0] == "method,mean_ms,sd_ms,ratio");
  CHECK(csv[1].rfind("Amp-only,", 0) == 0);
  CHECK(csv[1].substr(csv[1].size() - 5) == ",1.00");
  CHECK_THROWS_AS(bench_preprocessing({}, 5), DataError);
  CHECK_THROWS_AS(bench_preprocessing(data, 0), ConfigError);
}

TEST_CASE("run_preprocessing: checksum follows the pipeline") {
  SynthConfig c;
  c.samples_per_cell = 1;
  const auto s = generate(c).front();
  const auto [amp, raw] = decompose<float, double>(s.channels[0]);
  const auto unw = unwrap_temporal(raw);
  const auto san = sanitize(unw).first;
  CHECK(run_preprocessing(s, PreprocMethod::kAmpOnly) == doctest::Approx(amp.values(0, 0)).epsilon(1e-6));
  CHECK(run_preprocessing(s, PreprocMethod::kPhaseUnwrapped) == doctest::Approx(unw.values(0, 0)).epsilon(1e-6));
  CHECK(run_preprocessing(s, PreprocMethod::kAmpPhaseSanitized) ==
        doctest::Approx(san.values(0, 0) + amp.values(0, 0)).epsilon(1e-6));
}

TEST_CASE("figure data: shapes, stages and defaults") {
  SynthConfig c;
  c.samples_per_cell = 1;
  const auto s = generate(c).front();
  const auto heat = figure_data(s, FigureKind::kHeatmap, FigureStage::kRaw);
  CHECK(heat.rows() == 64);
  CHECK(heat.cols() == 128);
  const auto overlay = figure_data(s, FigureKind::kOverlay, FigureStage::kUnwrapped);
  CHECK(overlay.rows() == 8);
  CHECK(overlay.cols() == 64);
  const auto times = snapshot_times(128, 8);
  CHECK(times.front() == 0);
  CHECK(times.back() == 127);
  const auto unw = figure_stage(s, FigureStage::kUnwrapped);
  for (std::size_t i = 0; i < times.size(); ++i) {
    CHECK(overlay.row(static_cast<Eigen::Index>(i)).transpose() == unw.col(times[i]));
  }
  CHECK(figure_data(s, FigureKind::kOverlay, FigureStage::kAmplitude, 3).rows() == 3);
  CHECK_THROWS_AS(figure_stage(s, FigureStage::kRaw, 1), InputError);
  CHECK_THROWS_AS(snapshot_times(128, 0), UsageError);
  CHECK(!parse_figure_kind("histogram"));
  CHECK(!parse_figure_stage("denoised"));
  CHECK(parse_figure_stage("sanitized") == FigureStage::kSanitized);
}

TEST_CASE("figure data: exactly linear phase sanitizes to an all-zero grid") {
  LabeledSample s;
  const Eigen::Index S = 16, T = 10;
  ComplexCsi<float> csi(S, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index k = 0; k < S; ++k) {
      const double phase = 0.05 * static_cast<double>(t) * static_cast<double>(k + 1) - 0.3 + 0.01 * t;
      csi.real(k, t) = static_cast<float>(2.0 * std::cos(phase));
      csi.imag(k, t) = static_cast<float>(2.0 * std::sin(phase));
    }
  }
  s.channels.push_back(csi);
  const auto grid = figure_data(s, FigureKind::kHeatmap, FigureStage::kSanitized);
  CHECK(grid.cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("export_figure_data: CSV grid on disk") {
  SynthConfig c;
  c.samples_per_cell = 1;
  const auto s = generate(c).front();
  const auto path = std::filesystem::temp_directory_path() / "csifuse_test_harness_fig.csv";
  export_figure_data(s, FigureKind::kHeatmap, FigureStage::kAmplitude, path);
  std::ifstream in(path);
  int rows = 0;
  for (std::string line; std::getline(in, line); ++rows) {
    CHECK(std::count(line.begin(), line.end(), ',') == 127);
  }
  CHECK(rows == 64);
  export_figure_data(s, FigureKind::kOverlay, FigureStage::kSanitized, path);
  std::ifstream in2(path);
  rows = 0;
  for (std::string line; std::getline(in2, line); ++rows) CHECK(std::count(line.begin(), line.end(), ',') == 63);
  CHECK(rows == 8);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(export_figure_data(s, FigureKind::kHeatmap, FigureStage::kRaw, "/nonexistent-dir/x.csv"), IoError);
}
