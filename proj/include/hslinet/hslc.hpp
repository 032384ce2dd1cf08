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
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "hslinet/error.hpp"
#include "hslinet/tensor.hpp"

// HSLC raster container. All multi-byte values are little-endian.
//
//   bytes  0-3   magic "HSLC"
//   byte   4     kind: 0 = float32 cube, 1 = u16 label raster
//   bytes  5-8   H (u32)
//   bytes  9-12  W (u32)
//   bytes 13-16  C (u32; 1 for LiDAR, written as 1 and ignored for labels)
//   payload      row-major [H][W][C] float32 (kind 0) or [H][W] u16 (kind 1)

namespace hslinet {

/// Integer class raster; 0 marks an unlabeled pixel, 1..C are classes.
struct LabelRaster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint16_t> data;

  LabelRaster() = default;
  LabelRaster(std::size_t h, std::size_t w, std::uint16_t fill = 0)
      : height(h), width(w), data(h * w, fill) {}

  std::uint16_t& at(std::size_t r, std::size_t c) { return data[r * width + c]; }
  std::uint16_t at(std::size_t r, std::size_t c) const { return data[r * width + c]; }

  friend bool operator==(const LabelRaster&, const LabelRaster&) = default;
};

namespace hslc {

inline constexpr std::array<char, 4> kMagic{'H', 'S', 'L', 'C'};
inline constexpr std::size_t kHeaderBytes = 17;

enum class Kind : std::uint8_t { FloatCube = 0, Labels = 1 };

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

inline float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = get_u32(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v == 0 || v > 0xFFFFFFFFu) throw DataError(std::string("HSLC: invalid ") + what);
  return static_cast<std::uint32_t>(v);
}

struct Header {
  Kind kind;
  std::size_t h, w, c;
};

inline std::vector<std::uint8_t> header(Kind kind, std::size_t h, std::size_t w, std::size_t c) {
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  out.push_back(static_cast<std::uint8_t>(kind));
  put_u32(out, checked_u32(h, "height"));
  put_u32(out, checked_u32(w, "width"));
  put_u32(out, checked_u32(c, "channel count"));
  return out;
}

inline Header parse_header(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes) throw DataError("HSLC: truncated header");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw DataError("HSLC: bad magic");
  if (bytes[4] > 1) throw DataError("HSLC: unknown kind " + std::to_string(bytes[4]));
  Header hd{static_cast<Kind>(bytes[4]), get_u32(&bytes[5]), get_u32(&bytes[9]), get_u32(&bytes[13])};
  if (hd.h == 0 || hd.w == 0) throw DataError("HSLC: zero raster dimension");
  if (hd.kind == Kind::FloatCube && hd.c == 0) throw DataError("HSLC: zero channel count");
  return hd;
}

inline void check_payload(const std::vector<std::uint8_t>& bytes, std::size_t expected) {
  const std::size_t have = bytes.size() - kHeaderBytes;
  if (have < expected) {
    throw DataError("HSLC: truncated payload (" + std::to_string(have) + " of " +
                    std::to_string(expected) + " bytes)");
  }
  if (have > expected) throw DataError("HSLC: trailing bytes after payload");
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_cube(const Tensor<float>& cube) {
  if (cube.rank() != 3) throw ShapeError("HSLC: cube must be [H, W, C]");
  auto out = detail::header(Kind::FloatCube, cube.dim(0), cube.dim(1), cube.dim(2));
  out.reserve(out.size() + 4 * cube.size());
  for (float v : cube.data()) detail::put_f32(out, v);
  return out;
}

inline std::vector<std::uint8_t> encode_labels(const LabelRaster& labels) {
  auto out = detail::header(Kind::Labels, labels.height, labels.width, 1);
  for (std::uint16_t v : labels.data) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  return out;
}

inline Tensor<float> decode_cube(const std::vector<std::uint8_t>& bytes) {
  const auto hd = detail::parse_header(bytes);
  if (hd.kind != Kind::FloatCube) throw DataError("HSLC: expected a float cube, found a label raster");
  const std::size_t n = hd.h * hd.w * hd.c;
  detail::check_payload(bytes, 4 * n);
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = detail::get_f32(&bytes[kHeaderBytes + 4 * i]);
  Tensor<float> cube({hd.h, hd.w, hd.c}, std::move(data));
  if (!cube.all_finite()) throw DataError("HSLC: cube contains NaN or Inf");
  return cube;
}

inline LabelRaster decode_labels(const std::vector<std::uint8_t>& bytes) {
  const auto hd = detail::parse_header(bytes);
  if (hd.kind != Kind::Labels) throw DataError("HSLC: expected a label raster, found a float cube");
  detail::check_payload(bytes, 2 * hd.h * hd.w);
  LabelRaster out(hd.h, hd.w);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const std::uint8_t* p = &bytes[kHeaderBytes + 2 * i];
    out.data[i] = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  return out;
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

inline Tensor<float> read_cube(const std::filesystem::path& path) {
  try {
    return decode_cube(read_bytes(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline LabelRaster read_labels(const std::filesystem::path& path) {
  try {
    return decode_labels(read_bytes(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_cube(const std::filesystem::path& path, const Tensor<float>& cube) {
  write_bytes(path, encode_cube(cube));
}

inline void write_labels(const std::filesystem::path& path, const LabelRaster& labels) {
  write_bytes(path, encode_labels(labels));
}

}  // namespace hslc
}  // namespace hslinet
