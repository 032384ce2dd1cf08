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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hslinet/error.hpp"
#include "hslinet/hslc.hpp"
#include "hslinet/random.hpp"
#include "hslinet/tensor.hpp"

namespace hslinet {

/// Co-registered HSI cube [H, W, CH], LiDAR raster [H, W, 1] and labels [H, W].
struct Scene {
  Tensor<float> hsi;
  Tensor<float> lidar;
  LabelRaster labels;

  std::size_t height() const { return hsi.dim(0); }
  std::size_t width() const { return hsi.dim(1); }
  std::size_t bands() const { return hsi.dim(2); }

  /// Largest label value, i.e. the class count C.
  std::size_t num_classes() const {
    std::uint16_t mx = 0;
    for (auto v : labels.data) mx = std::max(mx, v);
    return mx;
  }

  std::size_t labeled_count() const {
    return static_cast<std::size_t>(
        std::count_if(labels.data.begin(), labels.data.end(), [](auto v) { return v != 0; }));
  }
};

/// Throws DataError unless the three rasters agree on H and W.
inline void validate_scene(const Scene& s) {
  if (s.hsi.rank() != 3) throw DataError("scene: HSI must be [H, W, CH]");
  if (s.lidar.rank() != 3 || s.lidar.dim(2) != 1) throw DataError("scene: LiDAR must be [H, W, 1]");
  if (s.lidar.dim(0) != s.hsi.dim(0) || s.lidar.dim(1) != s.hsi.dim(1)) {
    throw DataError("scene: LiDAR raster " + std::to_string(s.lidar.dim(0)) + "x" +
                    std::to_string(s.lidar.dim(1)) + " does not match HSI " +
                    std::to_string(s.hsi.dim(0)) + "x" + std::to_string(s.hsi.dim(1)));
  }
  if (s.labels.height != s.hsi.dim(0) || s.labels.width != s.hsi.dim(1)) {
    throw DataError("scene: label raster " + std::to_string(s.labels.height) + "x" +
                    std::to_string(s.labels.width) + " does not match HSI " +
                    std::to_string(s.hsi.dim(0)) + "x" + std::to_string(s.hsi.dim(1)));
  }
}

inline Scene load_scene(const std::filesystem::path& hsi_path,
                        const std::filesystem::path& lidar_path,
                        const std::filesystem::path& labels_path) {
  Scene s{hslc::read_cube(hsi_path), hslc::read_cube(lidar_path), hslc::read_labels(labels_path)};
  validate_scene(s);
  return s;
}

// Conventional file names inside a scene directory.
inline constexpr const char* kHsiFile = "hsi.hslc";
inline constexpr const char* kLidarFile = "lidar.hslc";
inline constexpr const char* kLabelsFile = "labels.hslc";

inline Scene load_scene_dir(const std::filesystem::path& dir) {
  return load_scene(dir / kHsiFile, dir / kLidarFile, dir / kLabelsFile);
}

inline void save_scene_dir(const Scene& s, const std::filesystem::path& dir) {
  validate_scene(s);
  std::filesystem::create_directories(dir);
  hslc::write_cube(dir / kHsiFile, s.hsi);
  hslc::write_cube(dir / kLidarFile, s.lidar);
  hslc::write_labels(dir / kLabelsFile, s.labels);
}

// ---------------------------------------------------------------------------
// Normalization

/// Per-band z-score statistics. A band whose spread is zero is centered only
/// (its scale is stored as 1).
struct NormStats {
  std::vector<double> hsi_mean;
  std::vector<double> hsi_scale;
  double lidar_mean = 0;
  double lidar_scale = 1;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

inline void to_json(nlohmann::json& j, const NormStats& s) {
  j = {{"hsi_mean", s.hsi_mean},
       {"hsi_scale", s.hsi_scale},
       {"lidar_mean", s.lidar_mean},
       {"lidar_scale", s.lidar_scale}};
}

inline void from_json(const nlohmann::json& j, NormStats& s) {
  j.at("hsi_mean").get_to(s.hsi_mean);
  j.at("hsi_scale").get_to(s.hsi_scale);
  j.at("lidar_mean").get_to(s.lidar_mean);
  j.at("lidar_scale").get_to(s.lidar_scale);
  if (s.hsi_mean.size() != s.hsi_scale.size()) throw DataError("normalization stats: band count mismatch");
}

namespace detail {

// Mean and population standard deviation of channel `c` of an [H, W, C] cube.
inline std::pair<double, double> channel_moments(const Tensor<float>& cube, std::size_t c) {
  const std::size_t nch = cube.dim(2), npx = cube.dim(0) * cube.dim(1);
  double mean = 0;
  for (std::size_t i = 0; i < npx; ++i) mean += cube[i * nch + c];
  mean /= static_cast<double>(npx);
  double var = 0;
  for (std::size_t i = 0; i < npx; ++i) {
    const double d = cube[i * nch + c] - mean;
    var += d * d;
  }
  var /= static_cast<double>(npx);
  return {mean, std::sqrt(var)};
}

inline double guarded_scale(double stddev) { return stddev > 1e-12 ? stddev : 1.0; }

}  // namespace detail

/// Statistics over every pixel of `scene` (intended to be the training scene).
inline NormStats compute_norm_stats(const Scene& scene) {
  validate_scene(scene);
  NormStats s;
  for (std::size_t b = 0; b < scene.bands(); ++b) {
    const auto [mean, sd] = detail::channel_moments(scene.hsi, b);
    s.hsi_mean.push_back(mean);
    s.hsi_scale.push_back(detail::guarded_scale(sd));
  }
  const auto [mean, sd] = detail::channel_moments(scene.lidar, 0);
  s.lidar_mean = mean;
  s.lidar_scale = detail::guarded_scale(sd);
  return s;
}

inline Scene apply_norm(const Scene& scene, const NormStats& stats) {
  validate_scene(scene);
  if (stats.hsi_mean.size() != scene.bands()) {
    throw DataError("normalization stats have " + std::to_string(stats.hsi_mean.size()) +
                    " bands, scene has " + std::to_string(scene.bands()));
  }
  Scene out = scene;
  const std::size_t nch = scene.bands();
  for (std::size_t i = 0; i < out.hsi.size(); ++i) {
    const std::size_t b = i % nch;
    out.hsi[i] = static_cast<float>((scene.hsi[i] - stats.hsi_mean[b]) / stats.hsi_scale[b]);
  }
  for (std::size_t i = 0; i < out.lidar.size(); ++i) {
    out.lidar[i] = static_cast<float>((scene.lidar[i] - stats.lidar_mean) / stats.lidar_scale);
  }
  return out;
}

inline Scene invert_norm(const Scene& scene, const NormStats& stats) {
  Scene out = scene;
  const std::size_t nch = scene.bands();
  for (std::size_t i = 0; i < out.hsi.size(); ++i) {
    const std::size_t b = i % nch;
    out.hsi[i] = static_cast<float>(scene.hsi[i] * stats.hsi_scale[b] + stats.hsi_mean[b]);
  }
  for (std::size_t i = 0; i < out.lidar.size(); ++i) {
    out.lidar[i] = static_cast<float>(scene.lidar[i] * stats.lidar_scale + stats.lidar_mean);
  }
  return out;
}

/// Per-band z-score using the scene's own statistics.
inline Scene normalize_scene(const Scene& scene) {
  return apply_norm(scene, compute_norm_stats(scene));
}

// ---------------------------------------------------------------------------
// Patches

struct PatchConfig {
  std::size_t patch = 7;  // odd side length p
};

struct Sample {
  Tensor<float> hsi_patch;    // [p, p, CH]
  Tensor<float> lidar_patch;  // [p, p, 1]
  std::size_t label = 0;      // 1..C
  std::size_t row = 0;
  std::size_t col = 0;
};

/// Reflects `i` into [0, n) without repeating the edge sample
/// (-1 -> 1, n -> n - 2).
inline std::size_t mirror_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

/// One Sample per pixel index (row * W + col), mirror-padded at borders.
inline std::vector<Sample> extract_patches(const Scene& scene, const PatchConfig& cfg,
                                           const std::vector<std::size_t>& indices) {
  validate_scene(scene);
  if (cfg.patch % 2 == 0) throw DataError("patch size must be odd, got " + std::to_string(cfg.patch));
  const std::size_t h = scene.height(), w = scene.width(), ch = scene.bands(), p = cfg.patch;
  const auto half = static_cast<std::ptrdiff_t>(p / 2);
  std::vector<Sample> out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= h * w) throw DataError("sample index " + std::to_string(idx) + " outside the scene");
    if (scene.labels.data[idx] == 0) {
      throw DataError("sample index " + std::to_string(idx) + " references an unlabeled pixel");
    }
    Sample s{Tensor<float>({p, p, ch}), Tensor<float>({p, p, 1}), scene.labels.data[idx], idx / w,
             idx % w};
    for (std::size_t i = 0; i < p; ++i) {
      const std::size_t r =
          mirror_index(static_cast<std::ptrdiff_t>(s.row) + static_cast<std::ptrdiff_t>(i) - half, h);
      for (std::size_t j = 0; j < p; ++j) {
        const std::size_t c =
            mirror_index(static_cast<std::ptrdiff_t>(s.col) + static_cast<std::ptrdiff_t>(j) - half, w);
        std::copy_n(scene.hsi.raw() + (r * w + c) * ch, ch, s.hsi_patch.raw() + (i * p + j) * ch);
        s.lidar_patch[i * p + j] = scene.lidar[r * w + c];
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

/**
 * Parameters of the synthetic generator.
 *
 * Each class k gets a Gaussian-bump spectral signature with its own center
 * and width, and a mean elevation of k * elevation_step metres. Classes
 * are painted in square blocks so neighbourhoods carry class information.
 * LiDAR noise is deliberately large relative to elevation_step so that
 * elevation alone is a weak cue.
 */
struct SynthConfig {
  std::size_t classes = 8;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t bands = 32;
  double noise = 0.05;
  std::uint64_t seed = 1;
  double elevation_step = 1.0;
  double lidar_noise = 2.0;
  std::size_t block = 0;  // block side; 0 picks max(1, min(H, W) / 8)
};

/// Noise-free spectrum of class `k` (1-based): a Gaussian bump whose
/// center moves with k and whose width grows with k, on a 0.5 baseline.
/// Distinct widths keep classes apart even for order-insensitive features.
inline std::vector<double> class_signature(const SynthConfig& cfg, std::size_t k, double amplitude) {
  const double nc = static_cast<double>(cfg.classes), nb = static_cast<double>(cfg.bands);
  const double center = (static_cast<double>(k) - 0.5) / nc * nb;
  const double base = std::max(1.0, nb / (2.0 * nc));
  const double width = base * (0.5 + 1.5 * static_cast<double>(k - 1) / (nc - 1));
  std::vector<double> sig(cfg.bands);
  for (std::size_t b = 0; b < cfg.bands; ++b) {
    const double d = (static_cast<double>(b) - center) / width;
    sig[b] = 0.5 + amplitude * std::exp(-0.5 * d * d);
  }
  return sig;
}

inline Scene synth_scene(const SynthConfig& cfg) {
  if (cfg.classes < 2) throw DataError("synth: need at least 2 classes");
  if (cfg.bands < 2) throw DataError("synth: need at least 2 bands");
  if (cfg.height == 0 || cfg.width == 0) throw DataError("synth: empty scene");
  if (cfg.classes > 0xFFFF) throw DataError("synth: too many classes for a u16 label raster");
  const std::size_t block =
      cfg.block ? cfg.block : std::max<std::size_t>(1, std::min(cfg.height, cfg.width) / 8);
  const std::size_t brows = (cfg.height + block - 1) / block, bcols = (cfg.width + block - 1) / block;
  if (cfg.classes > brows * bcols) {
    throw DataError("synth: " + std::to_string(cfg.classes) + " classes exceed the " +
                    std::to_string(brows * bcols) + " available blocks");
  }
  Rng rng(cfg.seed);

  std::vector<std::size_t> order(brows * bcols);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::uint16_t> block_class(order.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    block_class[order[i]] = static_cast<std::uint16_t>(i % cfg.classes + 1);

  std::vector<std::vector<double>> sigs;
  for (std::size_t k = 1; k <= cfg.classes; ++k) sigs.push_back(class_signature(cfg, k, rng.uniform(0.8, 1.2)));

  Scene s{Tensor<float>({cfg.height, cfg.width, cfg.bands}), Tensor<float>({cfg.height, cfg.width, 1}),
          LabelRaster(cfg.height, cfg.width)};
  for (std::size_t r = 0; r < cfg.height; ++r)
    for (std::size_t c = 0; c < cfg.width; ++c) {
      const std::uint16_t k = block_class[(r / block) * bcols + c / block];
      s.labels.at(r, c) = k;
      const std::size_t px = r * cfg.width + c;
      for (std::size_t b = 0; b < cfg.bands; ++b) {
        const double noise = cfg.noise > 0 ? cfg.noise * rng.normal() : 0.0;
        s.hsi[px * cfg.bands + b] = static_cast<float>(sigs[k - 1][b] + noise);
      }
      const double elev_noise = cfg.lidar_noise > 0 ? cfg.lidar_noise * rng.normal() : 0.0;
      s.lidar[px] = static_cast<float>(cfg.elevation_step * k + elev_noise);
    }
  return s;
}

// ---------------------------------------------------------------------------
// Splits

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline void to_json(nlohmann::json& j, const Split& s) { j = {{"train", s.train}, {"test", s.test}}; }
inline void from_json(const nlohmann::json& j, Split& s) {
  j.at("train").get_to(s.train);
  j.at("test").get_to(s.test);
}

/// Exactly `per_class_train` random pixels of every present class go to
/// train, the rest to test. Both lists are returned in raster order.
inline Split split_samples(const Scene& scene, std::size_t per_class_train, std::uint64_t seed) {
  std::map<std::uint16_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < scene.labels.data.size(); ++i)
    if (scene.labels.data[i] != 0) by_class[scene.labels.data[i]].push_back(i);
  if (by_class.empty()) throw DataError("split: scene has no labeled pixels");
  Rng rng(seed);
  Split out;
  for (auto& [cls, px] : by_class) {
    if (px.size() <= per_class_train) {
      throw DataError("split: class " + std::to_string(cls) + " has " + std::to_string(px.size()) +
                      " labeled pixels, need more than " + std::to_string(per_class_train));
    }
    rng.shuffle(px);
    out.train.insert(out.train.end(), px.begin(), px.begin() + static_cast<std::ptrdiff_t>(per_class_train));
    out.test.insert(out.test.end(), px.begin() + static_cast<std::ptrdiff_t>(per_class_train), px.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace hslinet
