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

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hslinet/error.hpp"
#include "hslinet/hslc.hpp"

namespace hslinet {

/// C x C counts; rows are ground truth, columns predictions, classes 0-based.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
    if (classes == 0) throw DataError("confusion matrix needs at least one class");
  }

  std::size_t classes() const { return classes_; }

  void accumulate(std::size_t truth, std::size_t pred) {
    if (truth >= classes_ || pred >= classes_) {
      throw DataError("confusion matrix: class (" + std::to_string(truth) + ", " +
                      std::to_string(pred) + ") out of range for " + std::to_string(classes_) +
                      " classes");
    }
    ++counts_[truth * classes_ + pred];
    ++total_;
  }

  /// Elementwise sum, for merging evaluation shards.
  void merge(const ConfusionMatrix& other) {
    if (other.classes_ != classes_) throw DataError("confusion matrix: merging different class counts");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
  }

  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * classes_ + pred]; }
  std::uint64_t& at(std::size_t truth, std::size_t pred) {
    return counts_[truth * classes_ + pred];
  }
  std::uint64_t total() const { return total_; }

  std::uint64_t row_sum(std::size_t i) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < classes_; ++j) s += at(i, j);
    return s;
  }
  std::uint64_t col_sum(std::size_t j) const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < classes_; ++i) s += at(i, j);
    return s;
  }
  std::uint64_t trace() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < classes_; ++i) s += at(i, i);
    return s;
  }

  /// Re-derives the total after direct writes through at().
  void recount() {
    total_ = 0;
    for (auto v : counts_) total_ += v;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

namespace detail {
inline void require_nonempty(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DataError("metrics: empty confusion matrix");
}
}  // namespace detail

inline double overall_accuracy(const ConfusionMatrix& cm) {
  detail::require_nonempty(cm);
  return static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
}

/// Recall per class; NaN for classes with no ground-truth samples.
inline std::vector<double> per_class_accuracy(const ConfusionMatrix& cm) {
  detail::require_nonempty(cm);
  std::vector<double> out(cm.classes());
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    const auto row = cm.row_sum(i);
    out[i] = row ? static_cast<double>(cm.at(i, i)) / static_cast<double>(row)
                 : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

/// Mean of per-class recall over classes present in the ground truth.
/// Absent classes are skipped; `warn` (if given) receives one line each.
inline double average_accuracy(const ConfusionMatrix& cm, std::ostream* warn = nullptr) {
  const auto pc = per_class_accuracy(cm);
  double acc = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (std::isnan(pc[i])) {
      if (warn) *warn << "warning: class " << i + 1 << " has no test samples; excluded from AA\n";
      continue;
    }
    acc += pc[i];
    ++n;
  }
  return acc / static_cast<double>(n);
}

/// Cohen's kappa (p_o - p_e) / (1 - p_e). When p_e == 1 every sample sits in
/// one diagonal cell, which is perfect agreement.
inline double kappa(const ConfusionMatrix& cm) {
  detail::require_nonempty(cm);
  const double n = static_cast<double>(cm.total());
  const double po = static_cast<double>(cm.trace()) / n;
  double pe = 0;
  for (std::size_t i = 0; i < cm.classes(); ++i)
    pe += static_cast<double>(cm.row_sum(i)) * static_cast<double>(cm.col_sum(i));
  pe /= n * n;
  if (pe >= 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

struct MetricSummary {
  double oa = 0, aa = 0, kappa = 0;
  std::vector<double> per_class;
};

inline MetricSummary summarize(const ConfusionMatrix& cm, std::ostream* warn = nullptr) {
  return {overall_accuracy(cm), average_accuracy(cm, warn), kappa(cm), per_class_accuracy(cm)};
}

/// Fraction to a two-decimal percentage string, e.g. 0.96684 -> "96.68".
inline std::string percent(double fraction) {
  if (std::isnan(fraction)) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << fraction * 100.0;
  return os.str();
}

/// Class display names; defaults to C1..Cn when `names` is shorter.
inline std::string class_name(const std::vector<std::string>& names, std::size_t i) {
  return i < names.size() ? names[i] : "C" + std::to_string(i + 1);
}

inline std::vector<std::string> read_class_names(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open class-name file " + path.string());
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

/// JSON report: fractions plus two-decimal percentage strings.
inline nlohmann::json metrics_json(const ConfusionMatrix& cm, const std::vector<std::string>& names = {}) {
  const auto s = summarize(cm);
  nlohmann::json j;
  j["samples"] = cm.total();
  j["oa"] = s.oa;
  j["aa"] = s.aa;
  j["kappa"] = s.kappa;
  j["oa_percent"] = percent(s.oa);
  j["aa_percent"] = percent(s.aa);
  j["kappa_percent"] = percent(s.kappa);
  j["per_class"] = nlohmann::json::array();
  for (std::size_t i = 0; i < s.per_class.size(); ++i) {
    nlohmann::json row{{"class", class_name(names, i)}, {"support", cm.row_sum(i)},
                       {"accuracy_percent", percent(s.per_class[i])}};
    row["accuracy"] = std::isnan(s.per_class[i]) ? nlohmann::json(nullptr) : nlohmann::json(s.per_class[i]);
    j["per_class"].push_back(row);
  }
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (std::size_t k = 0; k < cm.classes(); ++k) r.push_back(cm.at(i, k));
    rows.push_back(r);
  }
  j["confusion"] = rows;
  return j;
}

/// CSV report in the layout of a per-class accuracy table: one row per
/// class, then OA, AA and Kappa, all as percentages.
inline std::string metrics_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names = {}) {
  const auto s = summarize(cm);
  std::ostringstream os;
  os << "no,class,accuracy\n";
  for (std::size_t i = 0; i < s.per_class.size(); ++i)
    os << 'C' << i + 1 << ',' << class_name(names, i) << ',' << percent(s.per_class[i]) << '\n';
  os << ",OA," << percent(s.oa) << '\n';
  os << ",AA," << percent(s.aa) << '\n';
  os << ",Kappa," << percent(s.kappa) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Classification maps

using Rgb = std::array<std::uint8_t, 3>;

/// Fixed 16-entry palette; index 0 (unlabeled) is black. Classes above 15
/// wrap around to index ((c - 1) % 15) + 1.
inline const std::array<Rgb, 16>& map_palette() {
  static const std::array<Rgb, 16> p{{{0, 0, 0},
                                      {0, 205, 0},
                                      {127, 255, 0},
                                      {46, 139, 87},
                                      {0, 139, 0},
                                      {160, 82, 45},
                                      {0, 255, 255},
                                      {255, 255, 255},
                                      {216, 191, 216},
                                      {255, 0, 0},
                                      {139, 0, 0},
                                      {100, 100, 100},
                                      {255, 255, 0},
                                      {238, 154, 0},
                                      {85, 26, 139},
                                      {255, 127, 80}}};
  return p;
}

inline Rgb palette_color(std::uint16_t cls) {
  const auto& p = map_palette();
  if (cls == 0) return p[0];
  return p[(cls - 1) % 15 + 1];
}

/// Binary P6 PPM bytes for a class raster.
inline std::vector<std::uint8_t> encode_ppm(const LabelRaster& classes) {
  const std::string header =
      "P6\n" + std::to_string(classes.width) + " " + std::to_string(classes.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 3 * classes.data.size());
  for (auto c : classes.data) {
    const Rgb rgb = palette_color(c);
    out.insert(out.end(), rgb.begin(), rgb.end());
  }
  return out;
}

inline void write_ppm(const std::filesystem::path& path, const LabelRaster& classes) {
  hslc::write_bytes(path, encode_ppm(classes));
}

}  // namespace hslinet
