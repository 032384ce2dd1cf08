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
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hslinet/error.hpp"
#include "hslinet/hslc.hpp"
#include "hslinet/model.hpp"

// Checkpoint layout (little-endian):
//
//   "HSLM" | u32 version
//   config: u32 patch, bands, hidden, k1, k2, s_channels, s_depth,
//           head_channels, classes;
//           u8 activation, enable_forward, enable_reversed, enable_spatial, modality
//   u32 parameter count, then per parameter in for_each_parameter order:
//           u32 rank, u32 dims[rank], f32 values[prod(dims)]
//   u32 batch-norm layer count, then per layer:
//           f32 running_mean[s_channels], f32 running_var[s_channels]

namespace hslinet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    const auto v = hslc::detail::get_u32(&bytes_[pos_]);
    pos_ += 4;
    return v;
  }
  float f32() {
    need(4);
    const float v = hslc::detail::get_f32(&bytes_[pos_]);
    pos_ += 4;
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint: corrupt file (truncated)");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void put_tensor_values(std::vector<std::uint8_t>& out, const Tensor<T>& t) {
  for (T v : t.data()) hslc::detail::put_f32(out, static_cast<float>(v));
}

template <typename T>
void read_tensor_values(ByteReader& in, Tensor<T>& t) {
  for (auto& v : t.data()) {
    const float f = in.f32();
    if (!std::isfinite(f)) throw DataError("checkpoint: corrupt file (non-finite value)");
    v = static_cast<T>(f);
  }
}

}  // namespace detail

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(HsLiNetModel<T>& m) {
  using hslc::detail::put_u32;
  std::vector<std::uint8_t> out{'H', 'S', 'L', 'M'};
  put_u32(out, kCheckpointVersion);
  const auto& c = m.config;
  for (std::size_t v : {c.patch, c.bands, c.hidden, c.k1, c.k2, c.s_channels, c.s_depth,
                        c.head_channels, c.classes})
    put_u32(out, static_cast<std::uint32_t>(v));
  out.push_back(static_cast<std::uint8_t>(c.activation));
  out.push_back(c.enable_forward);
  out.push_back(c.enable_reversed);
  out.push_back(c.enable_spatial);
  out.push_back(static_cast<std::uint8_t>(c.modality));

  const auto params = parameters(m);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter<T>* p : params) {
    put_u32(out, static_cast<std::uint32_t>(p->value.rank()));
    for (std::size_t d : p->value.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    detail::put_tensor_values(out, p->value);
  }
  const std::size_t layers = m.sblock ? m.sblock->layers.size() : 0;
  put_u32(out, static_cast<std::uint32_t>(layers));
  for (std::size_t i = 0; i < layers; ++i) {
    detail::put_tensor_values(out, m.sblock->layers[i].stats.running_mean);
    detail::put_tensor_values(out, m.sblock->layers[i].stats.running_var);
  }
  return out;
}

template <typename T>
HsLiNetModel<T> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes);
  std::array<std::uint8_t, 4> magic{};
  for (auto& b : magic) b = in.u8();
  if (magic != std::array<std::uint8_t, 4>{'H', 'S', 'L', 'M'}) throw DataError("checkpoint: bad magic");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: version " + std::to_string(version) + " not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  ModelConfig c;
  for (std::size_t* f : {&c.patch, &c.bands, &c.hidden, &c.k1, &c.k2, &c.s_channels, &c.s_depth,
                         &c.head_channels, &c.classes})
    *f = in.u32();
  for (std::size_t v : {c.patch, c.bands, c.hidden, c.k1, c.k2, c.s_channels, c.s_depth,
                        c.head_channels, c.classes})
    if (v > (1u << 16)) throw DataError("checkpoint: corrupt file (implausible config value)");
  const std::uint8_t act = in.u8();
  if (act > 2) throw DataError("checkpoint: corrupt file (activation)");
  c.activation = static_cast<Activation>(act);
  c.enable_forward = in.u8() != 0;
  c.enable_reversed = in.u8() != 0;
  c.enable_spatial = in.u8() != 0;
  const std::uint8_t mod = in.u8();
  if (mod > 2) throw DataError("checkpoint: corrupt file (modality)");
  c.modality = static_cast<Modality>(mod);
  try {
    c.validate();
  } catch (const DataError& e) {
    throw DataError(std::string("checkpoint: corrupt file (") + e.what() + ")");
  }

  HsLiNetModel<T> m = init_params<T>(c, 0);
  const auto params = parameters(m);
  if (in.u32() != params.size()) throw DataError("checkpoint: corrupt file (parameter count)");
  for (Parameter<T>* p : params) {
    const std::uint32_t rank = in.u32();
    Shape shape;
    for (std::uint32_t i = 0; i < rank && i < 8; ++i) shape.push_back(in.u32());
    if (shape != p->value.shape()) throw DataError("checkpoint: corrupt file (parameter shape)");
    detail::read_tensor_values(in, p->value);
  }
  const std::size_t layers = m.sblock ? m.sblock->layers.size() : 0;
  if (in.u32() != layers) throw DataError("checkpoint: corrupt file (batch-norm layer count)");
  for (std::size_t i = 0; i < layers; ++i) {
    detail::read_tensor_values(in, m.sblock->layers[i].stats.running_mean);
    detail::read_tensor_values(in, m.sblock->layers[i].stats.running_var);
  }
  if (!in.done()) throw DataError("checkpoint: corrupt file (trailing bytes)");
  return m;
}

template <typename T>
void save_checkpoint(HsLiNetModel<T>& m, const std::filesystem::path& path) {
  hslc::write_bytes(path, encode_checkpoint(m));
}

template <typename T>
HsLiNetModel<T> load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint<T>(hslc::read_bytes(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace hslinet
