// Copyright 2026 The HSLiNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// hslinet: command-line front end for the HSLiNet library.
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error,
// 3 numerical failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "hslinet/hslinet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hslinet;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Shared option groups

struct SceneArgs {
  std::string dir, hsi, lidar, labels;

  void attach(CLI::App* app) {
    app->add_option("--scene", dir, "Scene directory holding hsi.hslc, lidar.hslc, labels.hslc");
    app->add_option("--hsi", hsi, "HSI cube (HSLC)");
    app->add_option("--lidar", lidar, "LiDAR raster (HSLC)");
    app->add_option("--labels", labels, "Label raster (HSLC)");
  }

  std::vector<fs::path> paths() const {
    const bool files = !hsi.empty() || !lidar.empty() || !labels.empty();
    if (!dir.empty() && files) throw UsageError("use either --scene or --hsi/--lidar/--labels, not both");
    if (!dir.empty()) return {fs::path(dir) / kHsiFile, fs::path(dir) / kLidarFile, fs::path(dir) / kLabelsFile};
    if (hsi.empty() || lidar.empty() || labels.empty())
      throw UsageError("a scene is required: --scene DIR or all of --hsi, --lidar, --labels");
    return {hsi, lidar, labels};
  }

  void check() const {
    for (const auto& p : paths())
      if (!fs::is_regular_file(p)) throw DataError("input file not found: " + p.string());
  }

  Scene load() const {
    const auto p = paths();
    return load_scene(p[0], p[1], p[2]);
  }
};

struct ModelArgs {
  ModelConfig cfg;
  bool no_forward = false, no_reversed = false, no_spatial = false;
  std::string modality = "both";
  std::string activation = "silu";

  void attach(CLI::App* app) {
    app->add_option("--patch-size", cfg.patch, "Patch side length (odd)")->capture_default_str();
    app->add_option("--hidden", cfg.hidden, "Spectral hidden width d")->capture_default_str();
    app->add_option("--k1", cfg.k1, "1-D kernel size")->capture_default_str();
    app->add_option("--k2", cfg.k2, "2-D kernel size")->capture_default_str();
    app->add_option("--s-channels", cfg.s_channels, "Spatial block channels")->capture_default_str();
    app->add_option("--s-depth", cfg.s_depth, "Spatial block depth")->capture_default_str();
    app->add_option("--head-channels", cfg.head_channels, "Fusion Conv1d channels")->capture_default_str();
    app->add_option("--activation", activation, "relu | tanh | silu")->capture_default_str();
    app->add_flag("--no-forward", no_forward, "Disable the forward spectral direction");
    app->add_flag("--no-reversed", no_reversed, "Disable the reversed spectral direction");
    app->add_flag("--no-spatial", no_spatial, "Disable the spatial block");
    app->add_option("--modality", modality, "both | hsi | lidar")->capture_default_str();
  }

  ModelConfig resolve(const Scene& scene) const {
    ModelConfig c = cfg;
    c.bands = scene.bands();
    c.classes = scene.num_classes();
    c.enable_forward = !no_forward;
    c.enable_reversed = !no_reversed;
    c.enable_spatial = !no_spatial;
    c.modality = parse_modality(modality);
    c.activation = parse_activation(activation);
    c.validate();
    return c;
  }
};

json model_config_json(const ModelConfig& c) {
  return {{"patch", c.patch},
          {"bands", c.bands},
          {"hidden", c.hidden},
          {"k1", c.k1},
          {"k2", c.k2},
          {"s_channels", c.s_channels},
          {"s_depth", c.s_depth},
          {"head_channels", c.head_channels},
          {"classes", c.classes},
          {"activation", to_string(c.activation)},
          {"forward", c.enable_forward},
          {"reversed", c.enable_reversed},
          {"spatial", c.enable_spatial},
          {"modality", to_string(c.modality)}};
}

json train_config_json(const TrainConfig& t) {
  return {{"batch", t.batch_size},   {"lr", t.lr},         {"epochs", t.epochs},
          {"seed", t.seed},          {"beta1", t.beta1},   {"beta2", t.beta2},
          {"adam_eps", t.adam_eps},  {"eval_every", t.eval_every}};
}

void print_config(const std::string& command, const json& j) {
  std::cout << "# " << command << " configuration\n" << j.dump(2) << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(tok, &used);
      if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("invalid epoch list entry '" + tok + "'");
    }
  }
  if (out.empty()) throw UsageError("empty epoch list");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::pair<std::size_t, std::size_t> parse_size(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    const long long h = std::stoll(text.substr(0, x)), w = std::stoll(text.substr(x + 1));
    if (h <= 0 || w <= 0) throw std::invalid_argument(text);
    return {static_cast<std::size_t>(h), static_cast<std::size_t>(w)};
  } catch (const std::exception&) {
    throw UsageError("--size expects HxW, got '" + text + "'");
  }
}

void print_metrics(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
  const auto s = summarize(cm, &std::cerr);
  std::cout << "class                 support  accuracy\n";
  for (std::size_t i = 0; i < s.per_class.size(); ++i) {
    std::cout << std::left << std::setw(20) << class_name(names, i) << std::right << std::setw(10)
              << cm.row_sum(i) << std::setw(10) << percent(s.per_class[i]) << "\n";
  }
  std::cout << "OA    " << percent(s.oa) << "\nAA    " << percent(s.aa) << "\nKappa " << percent(s.kappa) << "\n";
}

// Reference values for the 144-band, 15-class Houston 2013 scene. They are
// logged next to the measured numbers and never asserted.
bool houston_shaped(const Scene& scene) { return scene.bands() == 144 && scene.num_classes() == 15; }

void log_houston_reference(const MetricSummary& s) {
  std::cout << "# Houston 2013 reference (full model): OA 96.68 AA 97.32 Kappa 96.39\n"
            << "# measured:                          OA " << percent(s.oa) << " AA " << percent(s.aa)
            << " Kappa " << percent(s.kappa) << "\n";
}

struct RunDir {
  fs::path root;
  fs::path model() const { return root / "model.hslm"; }
  fs::path best() const { return root / "best.hslm"; }
  fs::path norm() const { return root / "norm.json"; }
  fs::path split() const { return root / "split.json"; }
};

// ---------------------------------------------------------------------------
// Subcommands

struct SynthCmd {
  SynthConfig cfg;
  std::string size = "64x64";
  std::string out;

  void attach(CLI::App* app) {
    app->add_option("--classes", cfg.classes, "Number of classes")->capture_default_str();
    app->add_option("--size", size, "Scene size HxW")->capture_default_str();
    app->add_option("--bands", cfg.bands, "Spectral bands")->capture_default_str();
    app->add_option("--noise", cfg.noise, "Spectral noise sigma")->capture_default_str();
    app->add_option("--lidar-noise", cfg.lidar_noise, "Elevation noise sigma")->capture_default_str();
    app->add_option("--elevation-step", cfg.elevation_step, "Mean elevation step per class")
        ->capture_default_str();
    app->add_option("--block", cfg.block, "Class block side (0 = auto)")->capture_default_str();
    app->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    app->add_option("--out", out, "Output scene directory")->required();
  }

  int run() {
    std::tie(cfg.height, cfg.width) = parse_size(size);
    print_config("synth", {{"classes", cfg.classes},
                           {"height", cfg.height},
                           {"width", cfg.width},
                           {"bands", cfg.bands},
                           {"noise", cfg.noise},
                           {"lidar_noise", cfg.lidar_noise},
                           {"elevation_step", cfg.elevation_step},
                           {"block", cfg.block},
                           {"seed", cfg.seed},
                           {"out", out}});
    ensure_dir(out);
    const Scene scene = synth_scene(cfg);
    save_scene_dir(scene, out);
    std::cout << "wrote " << scene.height() << "x" << scene.width() << "x" << scene.bands() << " scene with "
              << scene.num_classes() << " classes to " << out << "\n";
    return 0;
  }
};

struct TrainCmd {
  SceneArgs scene_args;
  ModelArgs model_args;
  TrainConfig train;
  std::size_t per_class = 8;
  std::string split_file;
  std::string epoch_grid;
  std::string out = "run";

  void attach(CLI::App* app) {
    scene_args.attach(app);
    model_args.attach(app);
    app->add_option("--epochs", train.epochs, "Training epochs")->capture_default_str();
    app->add_option("--batch", train.batch_size, "Mini-batch size")->capture_default_str();
    app->add_option("--lr", train.lr, "Adam learning rate")->capture_default_str();
    app->add_option("--seed", train.seed, "Seed for split, initialization and shuffling")->capture_default_str();
    train.eval_every = 10;
    app->add_option("--eval-every", train.eval_every, "Test evaluation period in epochs (0 = last only)")
        ->capture_default_str();
    app->add_option("--threads", train.eval_threads, "Evaluation threads (0 = all cores)")->capture_default_str();
    app->add_option("--train-per-class", per_class, "Training pixels per class")->capture_default_str();
    app->add_option("--split", split_file, "JSON split file with train/test pixel indices");
    app->add_option("--epoch-grid", epoch_grid, "Comma-separated epochs at which to report test metrics");
    app->add_option("--out", out, "Run directory")->capture_default_str();
  }

  int run() {
    scene_args.check();
    if (!split_file.empty() && !fs::is_regular_file(split_file))
      throw DataError("split file not found: " + split_file);
    std::vector<std::size_t> grid;
    if (!epoch_grid.empty()) {
      grid = parse_size_list(epoch_grid);
      train.epochs = grid.back();
      train.eval_epochs = grid;
    }
    train.validate();
    const RunDir run{out};
    ensure_dir(run.root);

    const Scene raw = scene_args.load();
    const ModelConfig mc = model_args.resolve(raw);
    const NormStats stats = compute_norm_stats(raw);
    const Scene scene = apply_norm(raw, stats);
    Split split;
    if (split_file.empty()) {
      split = split_samples(scene, per_class, train.seed);
    } else {
      split = read_json(split_file).get<Split>();
    }
    train.checkpoint = run.best();

    json cfg{{"model", model_config_json(mc)},
             {"train", train_config_json(train)},
             {"train_per_class", split_file.empty() ? json(per_class) : json(nullptr)},
             {"split", split_file.empty() ? json("random") : json(split_file)},
             {"epoch_grid", grid},
             {"threads", train.eval_threads},
             {"out", out}};
    print_config("train", cfg);
    write_text(run.root / "config.json", cfg.dump(2) + "\n");
    write_text(run.norm(), json(stats).dump(2) + "\n");
    write_text(run.split(), json(split).dump() + "\n");

    const auto train_set = extract_patches(scene, PatchConfig{mc.patch}, split.train);
    const auto test_set = extract_patches(scene, PatchConfig{mc.patch}, split.test);
    std::cout << "# " << train_set.size() << " training and " << test_set.size() << " test samples, "
              << "parameters: ";
    auto model = init_params<float>(mc, train.seed);
    std::cout << parameter_count(model) << "\n";

    const RunRecord record = train_model(model, train_set, test_set);
    save_checkpoint(model, run.model());
    write_text(run.root / "run.csv", run_record_csv(record));

    if (!grid.empty()) {
      std::ostringstream os;
      os.precision(6);
      os << std::fixed << "epoch,test_oa,test_aa,test_kappa\n";
      for (const auto& e : record.epochs)
        if (std::find(grid.begin(), grid.end(), e.epoch) != grid.end())
          os << e.epoch << ',' << e.test_oa << ',' << e.test_aa << ',' << e.test_kappa << '\n';
      write_text(run.root / "epoch_grid.csv", os.str());
      std::cout << "# epoch grid\n" << os.str();
    }

    if (record.epochs.empty()) {
      std::cout << "no epochs run\n";
      return 0;
    }
    std::cout << "final train loss: " << std::setprecision(6) << record.epochs.back().loss << "\n";
    std::cout << "final train OA: " << percent(record.epochs.back().train_oa) << "\n";
    if (!test_set.empty()) {
      const auto ev = evaluate(model, test_set, train.eval_threads);
      std::cout << "# test metrics (final model)\n";
      print_metrics(ev.confusion, {});
      write_text(run.root / "metrics.json", metrics_json(ev.confusion).dump(2) + "\n");
      write_text(run.root / "metrics.csv", metrics_csv(ev.confusion));
      if (houston_shaped(raw)) log_houston_reference(summarize(ev.confusion));
    }
    return 0;
  }

  RunRecord train_model(HsLiNetModel<float>& model, const std::vector<Sample>& train_set,
                        const std::vector<Sample>& test_set) {
    std::cout << "epoch       loss   train_oa    test_oa  seconds\n";
    return hslinet::train(model, train_set, test_set, train, [](const EpochRecord& e) {
      std::cout << std::setw(5) << e.epoch << std::setw(11) << std::setprecision(5) << std::fixed << e.loss
                << std::setw(11) << percent(e.train_oa) << std::setw(11) << percent(e.test_oa)
                << std::setw(9) << std::setprecision(1) << e.seconds << "\n"
                << std::defaultfloat;
      return true;
    });
  }
};

struct EvalCmd {
  SceneArgs scene_args;
  std::string model_dir;
  std::string checkpoint;
  std::string class_names;
  std::string out;
  bool all_labeled = false;
  bool best = false;
  std::size_t threads = 0;

  void attach(CLI::App* app) {
    scene_args.attach(app);
    app->add_option("--model", model_dir, "Run directory written by train")->required();
    app->add_option("--checkpoint", checkpoint, "Checkpoint file overriding the run's final model");
    app->add_flag("--best", best, "Use the best-by-test-OA checkpoint of the run");
    app->add_flag("--all-labeled", all_labeled, "Evaluate every labeled pixel instead of the test split");
    app->add_option("--class-names", class_names, "Text file with one class name per line");
    app->add_option("--threads", threads, "Evaluation threads (0 = all cores)")->capture_default_str();
    app->add_option("--out", out, "Directory for metrics.json and metrics.csv");
  }

  fs::path checkpoint_path(const RunDir& run) const {
    if (!checkpoint.empty()) return checkpoint;
    return best ? run.best() : run.model();
  }

  int run() {
    scene_args.check();
    const RunDir run{model_dir};
    const fs::path ckpt = checkpoint_path(run);
    for (const auto& p : {ckpt, run.norm()})
      if (!fs::is_regular_file(p)) throw DataError("required file not found: " + p.string());
    if (!all_labeled && !fs::is_regular_file(run.split()))
      throw DataError("required file not found: " + run.split().string());
    if (!class_names.empty() && !fs::is_regular_file(class_names))
      throw DataError("class-name file not found: " + class_names);
    print_config("eval", {{"model", model_dir},
                          {"checkpoint", ckpt.string()},
                          {"all_labeled", all_labeled},
                          {"class_names", class_names},
                          {"threads", threads},
                          {"out", out}});

    auto model = load_checkpoint<float>(ckpt);
    const Scene raw = scene_args.load();
    if (raw.bands() != model.config.bands)
      throw DataError("scene has " + std::to_string(raw.bands()) + " bands, model expects " +
                      std::to_string(model.config.bands));
    const Scene scene = apply_norm(raw, read_json(run.norm()).get<NormStats>());
    std::vector<std::size_t> idx;
    if (all_labeled) {
      for (std::size_t i = 0; i < scene.labels.data.size(); ++i)
        if (scene.labels.data[i] != 0) idx.push_back(i);
    } else {
      idx = read_json(run.split()).get<Split>().test;
    }
    const auto samples = extract_patches(scene, PatchConfig{model.config.patch}, idx);
    if (samples.empty()) throw DataError("nothing to evaluate");
    const auto names = class_names.empty() ? std::vector<std::string>{} : read_class_names(class_names);
    const auto ev = evaluate(model, samples, threads);
    std::cout << "# " << samples.size() << " samples\n";
    print_metrics(ev.confusion, names);
    if (houston_shaped(raw)) log_houston_reference(summarize(ev.confusion));
    if (!out.empty()) {
      ensure_dir(out);
      write_text(fs::path(out) / "metrics.json", metrics_json(ev.confusion, names).dump(2) + "\n");
      write_text(fs::path(out) / "metrics.csv", metrics_csv(ev.confusion, names));
    }
    return 0;
  }
};

struct AblateCmd {
  SceneArgs scene_args;
  ModelArgs model_args;
  AblationConfig cfg;
  std::uint64_t seed = 1;
  std::size_t seeds = 1;
  std::string out;

  void attach(CLI::App* app) {
    scene_args.attach(app);
    model_args.attach(app);
    app->add_option("--epochs", cfg.train.epochs, "Training epochs per run")->capture_default_str();
    app->add_option("--batch", cfg.train.batch_size, "Mini-batch size")->capture_default_str();
    app->add_option("--lr", cfg.train.lr, "Adam learning rate")->capture_default_str();
    app->add_option("--seed", seed, "First seed")->capture_default_str();
    app->add_option("--seeds", seeds, "Number of consecutive seeds to average")->capture_default_str();
    app->add_option("--train-per-class", cfg.per_class_train, "Training pixels per class")
        ->capture_default_str();
    app->add_option("--threads", cfg.train.eval_threads, "Evaluation threads (0 = all cores)")
        ->capture_default_str();
    app->add_option("--out", out, "CSV output file (also printed)");
  }

  int run() {
    scene_args.check();
    if (seeds == 0) throw UsageError("--seeds must be >= 1");
    if (!out.empty()) ensure_parent(out);
    cfg.train.validate();
    const Scene raw = scene_args.load();
    cfg.model = model_args.resolve(raw);
    cfg.seeds.clear();
    for (std::size_t i = 0; i < seeds; ++i) cfg.seeds.push_back(seed + i);
    print_config("ablate", {{"model", model_config_json(cfg.model)},
                            {"train", train_config_json(cfg.train)},
                            {"train_per_class", cfg.per_class_train},
                            {"seeds", cfg.seeds},
                            {"out", out}});
    const Scene scene = normalize_scene(raw);
    const auto layout = ablation_layout();
    const auto rows = run_ablation_grid(scene, cfg, [&](std::size_t r, std::uint64_t s, const MetricSummary& m) {
      std::cerr << "seed " << s << " " << layout[r].name << " (" << layout[r].group << "): OA " << percent(m.oa)
                << "\n";
    });
    const std::string csv = ablation_csv(rows);
    std::cout << csv;
    if (!out.empty()) write_text(out, csv);
    if (houston_shaped(raw)) {
      std::cout << "# Houston 2013 reference: Model1 OA 0.9668 AA 0.9722 Kappa 0.9639; LiDAR-only OA 0.2738\n";
    }
    return 0;
  }
};

struct GradcheckCmd {
  GradcheckConfig cfg;
  double tolerance = 1e-4;

  void attach(CLI::App* app) {
    app->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    app->add_option("--d", cfg.model.hidden, "Spectral hidden width")->capture_default_str();
    app->add_option("--p", cfg.model.patch, "Patch side length")->capture_default_str();
    app->add_option("--ch", cfg.model.bands, "Spectral bands")->capture_default_str();
    app->add_option("--classes", cfg.model.classes, "Number of classes")->capture_default_str();
    app->add_option("--batch", cfg.batch, "Samples in the checked batch")->capture_default_str();
    app->add_option("--step", cfg.step, "Central-difference step")->capture_default_str();
    app->add_option("--tol", tolerance, "Maximum accepted relative error")->capture_default_str();
  }

  int run() {
    cfg.model.validate();
    print_config("gradcheck", {{"model", model_config_json(cfg.model)},
                               {"batch", cfg.batch},
                               {"step", cfg.step},
                               {"floor", cfg.floor},
                               {"seed", cfg.seed},
                               {"tolerance", tolerance}});
    const auto report = model_gradcheck(cfg);
    std::cout << "checked " << report.checked << " parameters\n"
              << "max relative error: " << std::scientific << std::setprecision(3) << report.max_rel_error
              << " (" << report.worst_parameter << "[" << report.worst_index << "])\n";
    if (report.max_rel_error > tolerance) {
      std::cout << "FAIL: exceeds tolerance " << tolerance << "\n";
      return kExitNumerical;
    }
    std::cout << "OK\n";
    return 0;
  }
};

struct PredictMapCmd {
  SceneArgs scene_args;
  std::string model_dir;
  std::string checkpoint;
  std::string out = "map.ppm";
  bool all_pixels = false;
  bool ground_truth = false;

  void attach(CLI::App* app) {
    scene_args.attach(app);
    app->add_option("--model", model_dir, "Run directory written by train");
    app->add_option("--checkpoint", checkpoint, "Checkpoint file overriding the run's final model");
    app->add_flag("--all-pixels", all_pixels, "Classify unlabeled pixels too");
    app->add_flag("--ground-truth", ground_truth, "Render the label raster instead of predictions");
    app->add_option("--out", out, "Output PPM file")->capture_default_str();
  }

  int run() {
    scene_args.check();
    if (!ground_truth && model_dir.empty()) throw UsageError("--model is required unless --ground-truth is set");
    const RunDir run{model_dir};
    const fs::path ckpt = checkpoint.empty() ? run.model() : fs::path(checkpoint);
    if (!ground_truth)
      for (const auto& p : {ckpt, run.norm()})
        if (!fs::is_regular_file(p)) throw DataError("required file not found: " + p.string());
    ensure_parent(out);
    print_config("predict-map", {{"model", model_dir},
                                 {"checkpoint", ground_truth ? "" : ckpt.string()},
                                 {"all_pixels", all_pixels},
                                 {"ground_truth", ground_truth},
                                 {"out", out}});
    const Scene raw = scene_args.load();
    if (ground_truth) {
      write_ppm(out, raw.labels);
    } else {
      auto model = load_checkpoint<float>(ckpt);
      const Scene scene = apply_norm(raw, read_json(run.norm()).get<NormStats>());
      render_map(scene, model, out, all_pixels);
    }
    std::cout << "wrote " << raw.width() << "x" << raw.height() << " map to " << out << "\n";
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HSLiNet: joint hyperspectral and LiDAR classification"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SynthCmd synth;
  TrainCmd train;
  EvalCmd eval;
  AblateCmd ablate;
  GradcheckCmd gradcheck;
  PredictMapCmd predict;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic HSI+LiDAR scene");
  auto* s_train = app.add_subcommand("train", "Train a model on a scene");
  auto* s_eval = app.add_subcommand("eval", "Evaluate a trained model");
  auto* s_ablate = app.add_subcommand("ablate", "Run the architecture and modality ablation grid");
  auto* s_grad = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  auto* s_map = app.add_subcommand("predict-map", "Render a classification map as PPM");
  synth.attach(s_synth);
  train.attach(s_train);
  eval.attach(s_eval);
  ablate.attach(s_ablate);
  gradcheck.attach(s_grad);
  predict.attach(s_map);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*s_synth) return synth.run();
    if (*s_train) return train.run();
    if (*s_eval) return eval.run();
    if (*s_ablate) return ablate.run();
    if (*s_grad) return gradcheck.run();
    if (*s_map) return predict.run();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
