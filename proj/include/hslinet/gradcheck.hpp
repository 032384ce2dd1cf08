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
#include <string>
#include <vector>

#include "hslinet/model.hpp"
#include "hslinet/random.hpp"

namespace hslinet {

struct GradcheckConfig {
  ModelConfig model{.patch = 3, .bands = 6, .hidden = 8, .s_channels = 4, .classes = 4};
  std::size_t batch = 4;
  double step = 1e-5;
  // Denominator floor of the relative error, so gradients that are zero
  // analytically compare on an absolute scale.
  double floor = 1e-6;
  std::uint64_t seed = 7;
};

struct GradcheckReport {
  double max_rel_error = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Random samples with uniform(-1, 1) patches and labels cycling 1..C.
inline std::vector<Sample> random_samples(const ModelConfig& cfg, std::size_t n, Rng& rng) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s{Tensor<float>({cfg.patch, cfg.patch, cfg.bands}), Tensor<float>({cfg.patch, cfg.patch, 1}),
             i % cfg.classes + 1, 0, 0};
    for (auto& v : s.hsi_patch.data()) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : s.lidar_patch.data()) v = static_cast<float>(rng.uniform(-1, 1));
    out.push_back(std::move(s));
  }
  return out;
}

/// Cross-entropy of a train-mode forward pass (64-bit).
inline double model_loss(HsLiNetModel<double>& m, const Tensor<double>& batch,
                         const std::vector<std::size_t>& labels) {
  Tape<double> tape(false);
  Var x = tape.constant(batch);
  Var loss = softmax_cross_entropy(tape, model_forward(tape, m, x, Mode::Train), labels);
  return tape.value(loss)[0];
}

/**
 * Compares every analytic parameter gradient of the cross-entropy loss with
 * a central finite difference at 64-bit precision. A and B are randomized
 * so the state-update terms carry gradient.
 */
inline GradcheckReport model_gradcheck(const GradcheckConfig& cfg) {
  Rng rng(cfg.seed);
  auto m = init_params<double>(cfg.model, cfg.seed);
  if (m.binet) {
    for (auto* dir : {m.binet->forward ? &*m.binet->forward : nullptr,
                      m.binet->reversed ? &*m.binet->reversed : nullptr})
      if (dir)
        for (auto& v : dir->state.value.data()) v = rng.uniform(-0.5, 0.5);
    for (auto& v : m.binet->delta.value.data()) v = rng.uniform(0.5, 1.5);
  }
  const auto samples = random_samples(cfg.model, cfg.batch, rng);
  const Tensor<double> batch = make_batch<double>(samples, cfg.model);
  const auto labels = batch_labels<double>(samples);

  {
    Tape<double> tape;
    Var x = tape.constant(batch);
    Var loss = softmax_cross_entropy(tape, model_forward(tape, m, x, Mode::Train), labels);
    tape.backward(loss);
  }
  GradcheckReport report;
  for_each_parameter(m, [&](const std::string& name, Parameter<double>& p) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + cfg.step;
      const double up = model_loss(m, batch, labels);
      p.value[i] = orig - cfg.step;
      const double down = model_loss(m, batch, labels);
      p.value[i] = orig;
      const double numeric = (up - down) / (2 * cfg.step);
      const double analytic = p.grad[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), cfg.floor});
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_parameter = name;
        report.worst_index = i;
      }
    }
  });
  return report;
}

}  // namespace hslinet
