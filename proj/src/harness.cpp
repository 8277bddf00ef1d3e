#include "csifuse/harness.hpp"

#include <cstdio>
#include <sstream>

namespace csifuse {
namespace {

std::string fixed2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

constexpr Velocity kTableOrder[] = {Velocity::V3, Velocity::V2, Velocity::V1};

std::string train_label(Velocity held_out) {
  std::string out;
  for (int v = 0; v < kNumVelocities; ++v) {
    if (static_cast<Velocity>(v) == held_out) continue;
    if (!out.empty()) out += "&";
    out += to_string(static_cast<Velocity>(v));
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  train.validate();
  if (hidden < 1 || classes < 2) throw ConfigError("ExperimentConfig: hidden and classes must be positive");
  if (val_fraction < 0.0 || val_fraction >= 1.0) throw ConfigError("ExperimentConfig: val_fraction must be in [0, 1)");
  if (seeds.empty()) throw ConfigError("ExperimentConfig: at least one seed is required");
}

const CellResult* ExperimentResult::find(Velocity held_out, InputConfig config, ModelKind model) const {
  for (const auto& c : cells) {
    if (c.held_out == held_out && c.config == config && c.model == model) return &c;
  }
  return nullptr;
}

double ExperimentResult::mean_accuracy(ModelKind model, InputConfig config) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& c : cells) {
    if (c.model == model && c.config == config) {
      sum += c.accuracy;
      ++n;
    }
  }
  if (n == 0) throw DataError("mean_accuracy: no cells for this model and configuration");
  return sum / n;
}

std::vector<PreparedSample<float>> prepare_dataset(const std::vector<LabeledSample>& data, InputConfig config) {
  std::vector<PreparedSample<float>> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back({preprocess<float>(s, config), s.label});
  return out;
}

CellResult run_lovo(const std::vector<LabeledSample>& data, const std::vector<PreparedSample<float>>& prepared,
                    ModelKind model, InputConfig config, Velocity held_out, const ExperimentConfig& exp) {
  exp.validate();
  require_supported(model, config);
  if (prepared.size() != data.size()) throw ShapeError("run_lovo: prepared set does not match the dataset");
  if (data.empty()) throw DataError("run_lovo: empty dataset");
  const auto split = lovo_split(data, held_out);
  if (split.train.empty() || split.test.empty()) throw DataError("run_lovo: empty split");
  for (const auto& s : data) {
    if (s.label >= exp.classes) throw LabelError("run_lovo: label " + std::to_string(s.label) + " out of range");
  }

  ModelShape shape;
  shape.subcarriers = data.front().channels.front().subcarriers();
  shape.receivers = static_cast<Eigen::Index>(data.front().channels.size());
  shape.hidden = exp.hidden;
  shape.classes = exp.classes;

  std::vector<const PreparedSample<float>*> test;
  for (auto i : split.test) test.push_back(&prepared[i]);

  CellResult cell;
  cell.held_out = held_out;
  cell.config = config;
  cell.model = model;
  cell.confusion = Eigen::MatrixXi::Zero(exp.classes, exp.classes);
  for (const auto seed : exp.seeds) {
    const auto [train_idx, val_idx] = carve_validation(data, split.train, exp.val_fraction, derive_seed(seed, 1));
    std::vector<const PreparedSample<float>*> train_set;
    std::vector<const PreparedSample<float>*> val_set;
    for (auto i : train_idx) train_set.push_back(&prepared[i]);
    for (auto i : val_idx) val_set.push_back(&prepared[i]);

    auto net = make_model<float>(model, config, shape);
    SplitMix64 init_rng(derive_seed(seed, 2));
    net->init(init_rng);
    TrainConfig tc = exp.train;
    tc.seed = derive_seed(seed, 3);
    const auto fit = train(*net, train_set, val_set, tc);
    const auto ev = evaluate(*net, test);
    cell.seeds.push_back(seed);
    cell.seed_accuracy.push_back(ev.accuracy);
    cell.best_epochs.push_back(fit.best_epoch);
    cell.confusion += ev.confusion;
  }
  cell.accuracy = 100.0 * cell.confusion.trace() / static_cast<double>(cell.confusion.sum());
  return cell;
}

CellResult run_lovo(const std::vector<LabeledSample>& data, ModelKind model, InputConfig config, Velocity held_out,
                    const ExperimentConfig& exp) {
  require_supported(model, config);
  return run_lovo(data, prepare_dataset(data, config), model, config, held_out, exp);
}

ExperimentResult run_full_grid(const std::vector<LabeledSample>& data, const ExperimentConfig& exp,
                               const ProgressFn& progress) {
  exp.validate();
  ExperimentResult result;
  result.seeds = exp.seeds;
  for (const auto config : kAllInputConfigs) {
    const auto prepared = prepare_dataset(data, config);
    for (const auto held_out : kTableOrder) {
      for (const auto model : {ModelKind::kBaseline, ModelKind::kGfBilstm}) {
        if (model == ModelKind::kGfBilstm && channel_multiplier(config) != 2) continue;
        result.cells.push_back(run_lovo(data, prepared, model, config, held_out, exp));
        if (progress) progress(result.cells.back());
      }
    }
  }
  return result;
}

std::string render_markdown(const ExperimentResult& result) {
  std::ostringstream out;
  out << "| Train | Test | Model | 1 | 2 | 3 | 4 |\n";
  out << "|---|---|---|---|---|---|---|\n";
  auto row = [&](const std::string& train, const std::string& test, ModelKind model, auto&& value) {
    out << "| " << train << " | " << test << " | " << display_name(model) << " |";
    for (const auto config : kAllInputConfigs) {
      const auto v = value(config);
      out << " " << (model == ModelKind::kGfBilstm && channel_multiplier(config) != 2 ? "−" : v) << " |";
    }
    out << "\n";
  };
  for (const auto held_out : kTableOrder) {
    bool first = true;
    for (const auto model : {ModelKind::kBaseline, ModelKind::kGfBilstm}) {
      row(first ? train_label(held_out) : "", first ? to_string(held_out) : "", model, [&](InputConfig c) {
        const auto* cell = result.find(held_out, c, model);
        return cell ? fixed2(cell->accuracy) : std::string("n/a");
      });
      first = false;
    }
  }
  bool first = true;
  for (const auto model : {ModelKind::kBaseline, ModelKind::kGfBilstm}) {
    row(first ? "mean" : "", first ? "all" : "", model, [&](InputConfig c) {
      for (const auto& cell : result.cells) {
        if (cell.model == model && cell.config == c) return fixed2(result.mean_accuracy(model, c));
      }
      return std::string("n/a");
    });
    first = false;
  }
  out << "\nSeeds:";
  for (auto s : result.seeds) out << " " << s;
  out << "\n";
  return out.str();
}

std::string render_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "held_out,model,config,seed,accuracy\n";
  for (const auto& c : result.cells) {
    const std::string prefix =
        to_string(c.held_out) + "," + std::string(cli_name(c.model)) + "," + std::string(cli_name(c.config)) + ",";
    for (std::size_t i = 0; i < c.seeds.size(); ++i) {
      out << prefix << c.seeds[i] << "," << fixed2(c.seed_accuracy[i]) << "\n";
    }
    out << prefix << "mean," << fixed2(c.accuracy) << "\n";
  }
  return out.str();
}

}  // namespace csifuse
