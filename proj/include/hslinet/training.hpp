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

#pragma once

#include <algorithm>
#include <bit>
#include <exception>
#include <span>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hslinet/checkpoint.hpp"
#include "hslinet/dataio.hpp"
#include "hslinet/error.hpp"
#include "hslinet/metrics.hpp"
#include "hslinet/model.hpp"
#include "hslinet/random.hpp"

namespace hslinet {

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr = 1e-4;
  std::size_t epochs = 100;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::filesystem::path checkpoint;  // best-by-test-OA model; empty disables
  std::size_t eval_every = 1;        // test evaluation period; 0 = last epoch only
  std::vector<std::size_t> eval_epochs;  // additional epochs with a test evaluation
  std::size_t eval_threads = 0;      // 0 = hardware concurrency

  void validate() const {
    if (batch_size == 0) throw DataError("train config: batch_size must be >= 1");
    if (!(lr > 0)) throw DataError("train config: lr must be > 0");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0;
  double train_oa = 0;
  // NaN on epochs without a test evaluation.
  double test_oa = std::numeric_limits<double>::quiet_NaN();
  double test_aa = std::numeric_limits<double>::quiet_NaN();
  double test_kappa = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0;
};

struct RunRecord {
  std::vector<EpochRecord> epochs;

  /// Equality of everything except wall-clock time.
  bool same_results(const RunRecord& o) const {
    if (epochs.size() != o.epochs.size()) return false;
    auto same = [](double a, double b) {
      return (std::isnan(a) && std::isnan(b)) || std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
    };
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      const auto& a = epochs[i];
      const auto& b = o.epochs[i];
      if (a.epoch != b.epoch || !same(a.loss, b.loss) || !same(a.train_oa, b.train_oa) ||
          !same(a.test_oa, b.test_oa) || !same(a.test_aa, b.test_aa) ||
          !same(a.test_kappa, b.test_kappa))
        return false;
    }
    return true;
  }
};

/// CSV with columns epoch,loss,train_oa,test_oa,test_aa,test_kappa,seconds.
/// Test columns are empty on epochs without evaluation.
inline std::string run_record_csv(const RunRecord& r) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss,train_oa,test_oa,test_aa,test_kappa,seconds\n";
  auto field = [&](double v) {
    if (!std::isnan(v)) os << v;
  };
  for (const auto& e : r.epochs) {
    os << e.epoch << ',';
    field(e.loss);
    os << ',';
    field(e.train_oa);
    os << ',';
    field(e.test_oa);
    os << ',';
    field(e.test_aa);
    os << ',';
    field(e.test_kappa);
    os << ',' << e.seconds << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Optimizer

/**
 * One bias-corrected Adam update over `params` at step `t` (1-based), then
 * zeroes their gradients. Throws StateError when no parameter received a
 * gradient since the last step.
 */
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, std::size_t t, const TrainConfig& cfg) {
  if (t == 0) throw StateError("adam_step: step index is 1-based");
  const bool any = std::any_of(params.begin(), params.end(), [](const Parameter<T>* p) { return p->touched; });
  if (!any) throw StateError("adam_step: called before any backward pass");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T step = static_cast<T>(cfg.lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(cfg.adam_eps);
  for (Parameter<T>* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const T g = p->grad[i];
      p->m[i] = b1 * p->m[i] + (T(1) - b1) * g;
      p->v[i] = b2 * p->v[i] + (T(1) - b2) * g * g;
      p->value[i] -= step * p->m[i] / (std::sqrt(p->v[i] * inv_c2) + eps);
    }
    if (!p->value.all_finite()) throw NumericalError("adam_step: parameter became non-finite");
    p->zero_grad();
  }
}

// ---------------------------------------------------------------------------
// Evaluation

template <typename T>
struct Evaluation {
  ConfusionMatrix confusion;
  std::vector<std::size_t> predictions;  // 0-based, aligned with the input samples
};

/**
 * Infer-mode classification of `samples`. Chunks run on worker threads with
 * their own tapes; results are merged in input order, so the outcome does
 * not depend on the thread count.
 */
template <typename T>
Evaluation<T> evaluate(HsLiNetModel<T>& m, std::span<const Sample> samples, std::size_t threads = 0,
                       std::size_t chunk = 256) {
  Evaluation<T> ev{ConfusionMatrix(m.config.classes), std::vector<std::size_t>(samples.size())};
  if (samples.empty()) return ev;
  const std::size_t chunks = (samples.size() + chunk - 1) / chunk;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, chunks);

  auto work = [&](std::size_t first_chunk) {
    for (std::size_t c = first_chunk; c < chunks; c += threads) {
      const std::size_t lo = c * chunk, hi = std::min(samples.size(), lo + chunk);
      const Tensor<T> logits = predict_logits(m, samples.subspan(lo, hi - lo), Mode::Infer);
      const std::size_t nc = m.config.classes;
      for (std::size_t i = lo; i < hi; ++i) {
        const T* row = logits.raw() + (i - lo) * nc;
        ev.predictions[i] = static_cast<std::size_t>(std::max_element(row, row + nc) - row);
      }
    }
  };
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        work(t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  try {
    work(0);
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].label == 0 || samples[i].label > m.config.classes) {
      throw DataError("evaluate: sample label " + std::to_string(samples[i].label) +
                      " outside 1.." + std::to_string(m.config.classes));
    }
    ev.confusion.accumulate(samples[i].label - 1, ev.predictions[i]);
  }
  return ev;
}

// ---------------------------------------------------------------------------
// Training loop

/// Called after every epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

namespace detail {

// Contiguous batches over `order`; a trailing batch of one sample is merged
// into the previous batch so batch statistics stay defined.
inline std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t lo = 0; lo < n; lo += batch) out.emplace_back(lo, std::min(n, lo + batch));
  if (out.size() > 1 && out.back().second - out.back().first == 1) {
    out[out.size() - 2].second = n;
    out.pop_back();
  }
  return out;
}

}  // namespace detail

/**
 * Mini-batch training with Adam and softmax cross-entropy.
 *
 * Epoch e shuffles the training set with a stream derived from
 * (cfg.seed, e). Train OA is measured in infer mode after each epoch; the
 * test split is evaluated every cfg.eval_every epochs and on the last
 * epoch. When cfg.checkpoint is set, the model with the best test OA so far
 * is written there.
 */
template <typename T>
RunRecord train(HsLiNetModel<T>& m, std::span<const Sample> train_set, std::span<const Sample> test_set,
                const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: empty training set");
  RunRecord record;
  auto params = parameters(m);
  for (auto* p : params) p->zero_grad();
  const auto started = std::chrono::steady_clock::now();
  double best_oa = -1;
  std::size_t step = 0;
  std::vector<std::size_t> order(train_set.size());
  std::vector<Sample> batch;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(cfg.seed, epoch));
    rng.shuffle(order);

    double loss_sum = 0;
    std::size_t loss_count = 0;
    for (auto [lo, hi] : detail::batch_ranges(order.size(), cfg.batch_size)) {
      batch.clear();
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(train_set[order[i]]);
      const auto labels = batch_labels<T>(batch);
      Tape<T> tape;
      try {
        Var x = tape.constant(make_batch<T>(batch, m.config));
        Var logits = model_forward(tape, m, x, Mode::Train);
        Var loss = softmax_cross_entropy(tape, logits, labels);
        loss_sum += static_cast<double>(tape.value(loss)[0]) * static_cast<double>(hi - lo);
        loss_count += hi - lo;
        tape.backward(loss);
        adam_step<T>(params, ++step, cfg);
      } catch (const NumericalError& e) {
        throw NumericalError("training aborted at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(step) + ": " + e.what());
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(loss_count);
    rec.train_oa = overall_accuracy(evaluate(m, train_set, cfg.eval_threads).confusion);
    const bool last = epoch == cfg.epochs;
    const bool periodic = (cfg.eval_every != 0 && epoch % cfg.eval_every == 0) ||
                          std::find(cfg.eval_epochs.begin(), cfg.eval_epochs.end(), epoch) !=
                              cfg.eval_epochs.end();
    if (!test_set.empty() && (last || periodic)) {
      const auto s = summarize(evaluate(m, test_set, cfg.eval_threads).confusion);
      rec.test_oa = s.oa;
      rec.test_aa = s.aa;
      rec.test_kappa = s.kappa;
      if (!cfg.checkpoint.empty() && s.oa > best_oa) {
        best_oa = s.oa;
        save_checkpoint(m, cfg.checkpoint);
      }
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    record.epochs.push_back(rec);
    if (on_epoch && !on_epoch(rec)) break;
  }
  if (!cfg.checkpoint.empty() && best_oa < 0 && cfg.epochs > 0) save_checkpoint(m, cfg.checkpoint);
  return record;
}

// ---------------------------------------------------------------------------
// Ablation grid

struct AblationRow {
  std::string group;  // "architecture" or "modality"
  std::string name;
  bool forward = true;
  bool reversed = true;
  bool spatial = true;
  Modality modality = Modality::Both;
  double oa = 0, aa = 0, kappa = 0;
  std::size_t runs = 0;
};

/// The five architecture variants followed by the three modality variants.
inline std::vector<AblationRow> ablation_layout() {
  return {
      {"architecture", "Model1", true, true, true, Modality::Both},
      {"architecture", "Model2", true, true, false, Modality::Both},
      {"architecture", "Model3", true, false, true, Modality::Both},
      {"architecture", "Model4", false, true, true, Modality::Both},
      {"architecture", "Model5", false, false, true, Modality::Both},
      {"modality", "HSI+LiDAR", true, true, true, Modality::Both},
      {"modality", "HSI", true, true, true, Modality::HsiOnly},
      {"modality", "LiDAR", true, true, true, Modality::LidarOnly},
  };
}

struct AblationConfig {
  ModelConfig model;  // base; flags and modality are overridden per row
  TrainConfig train;  // train.seed is replaced per seed
  std::size_t per_class_train = 8;
  std::vector<std::uint64_t> seeds{1};
};

/// Progress hook: (row index, seed, metrics of that run).
using AblationProgress = std::function<void(std::size_t, std::uint64_t, const MetricSummary&)>;

/**
 * Trains and tests every grid row for every seed on a normalized scene and
 * reports the mean metrics per row. The seed fixes the split, the
 * initialization and the shuffling; the HSI+LiDAR modality row is the same
 * configuration as Model1 and reuses its runs.
 */
inline std::vector<AblationRow> run_ablation_grid(const Scene& scene, const AblationConfig& cfg,
                                                  const AblationProgress& progress = {}) {
  auto rows = ablation_layout();
  for (std::uint64_t seed : cfg.seeds) {
    const Split split = split_samples(scene, cfg.per_class_train, seed);
    const PatchConfig pc{cfg.model.patch};
    const auto train_set = extract_patches(scene, pc, split.train);
    const auto test_set = extract_patches(scene, pc, split.test);
    MetricSummary model1{};
    for (std::size_t r = 0; r < rows.size(); ++r) {
      auto& row = rows[r];
      MetricSummary s;
      if (r == 5) {
        s = model1;
      } else {
        ModelConfig mc = cfg.model;
        mc.enable_forward = row.forward;
        mc.enable_reversed = row.reversed;
        mc.enable_spatial = row.spatial;
        mc.modality = row.modality;
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        tc.checkpoint.clear();
        tc.eval_every = 0;
        auto model = init_params<float>(mc, seed);
        train(model, train_set, {}, tc);
        s = summarize(evaluate(model, test_set, tc.eval_threads).confusion);
        if (r == 0) model1 = s;
      }
      row.oa += s.oa;
      row.aa += s.aa;
      row.kappa += s.kappa;
      ++row.runs;
      if (progress) progress(r, seed, s);
    }
  }
  for (auto& row : rows) {
    row.oa /= static_cast<double>(row.runs);
    row.aa /= static_cast<double>(row.runs);
    row.kappa /= static_cast<double>(row.runs);
  }
  return rows;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "group,name,forward,reversed,spatial,modality,runs,oa,aa,kappa\n";
  for (const auto& r : rows)
    os << r.group << ',' << r.name << ',' << r.forward << ',' << r.reversed << ',' << r.spatial << ','
       << to_string(r.modality) << ',' << r.runs << ',' << r.oa << ',' << r.aa << ',' << r.kappa << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Classification maps

/**
 * Classifies the labeled pixels of `scene` (every pixel with `all_pixels`)
 * and returns the predicted class raster (1-based, 0 where not classified).
 */
template <typename T>
LabelRaster predict_map(const Scene& scene, HsLiNetModel<T>& m, bool all_pixels = false) {
  validate_scene(scene);
  Scene probe = scene;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < scene.labels.data.size(); ++i) {
    if (all_pixels) {
      if (probe.labels.data[i] == 0) probe.labels.data[i] = 1;  // any nonzero marker works
      idx.push_back(i);
    } else if (scene.labels.data[i] != 0) {
      idx.push_back(i);
    }
  }
  LabelRaster out(scene.height(), scene.width());
  constexpr std::size_t kBlock = 4096;
  for (std::size_t lo = 0; lo < idx.size(); lo += kBlock) {
    const std::vector<std::size_t> part(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                        idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), lo + kBlock)));
    auto samples = extract_patches(probe, PatchConfig{m.config.patch}, part);
    for (auto& s : samples) s.label = 1;
    const auto ev = evaluate(m, samples);
    for (std::size_t i = 0; i < part.size(); ++i)
      out.data[part[i]] = static_cast<std::uint16_t>(ev.predictions[i] + 1);
  }
  return out;
}

template <typename T>
void render_map(const Scene& scene, HsLiNetModel<T>& m, const std::filesystem::path& out_path,
                bool all_pixels = false) {
  write_ppm(out_path, predict_map(scene, m, all_pixels));
}

}  // namespace hslinet
