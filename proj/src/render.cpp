// Copyright 2026 The GridAR Authors. All Rights Reserved.
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

#include "gridar/render.hpp"

#include <zlib.h>

#include <array>
#include <cmath>

#include "gridar/errors.hpp"

namespace gridar {
namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 4> kColorRgb = {{
    {220, 40, 40},   // red
    {40, 170, 60},   // green
    {40, 80, 220},   // blue
    {230, 200, 30},  // yellow
}};

bool inside_glyph(int shape, int x, int y, int tile) {
  // Pixel centers in tile coordinates.
  const double px = x + 0.5;
  const double py = y + 0.5;
  const double margin = tile / 8.0;
  switch (shape) {
    case 0:  // square
      return px >= margin && px <= tile - margin && py >= margin && py <= tile - margin;
    case 1: {  // disc
      const double c = tile / 2.0;
      const double r = tile / 2.0 - margin;
      return (px - c) * (px - c) + (py - c) * (py - c) <= r * r;
    }
    default: {  // triangle, apex up
      if (py < margin || py > tile - margin) return false;
      const double t = (py - margin) / (tile - 2 * margin);
      const double half = t * (tile / 2.0 - margin);
      return std::abs(px - tile / 2.0) <= half;
    }
  }
}

void put_u32(std::string& out, std::uint32_t v) {
  out += static_cast<char>(v >> 24);
  out += static_cast<char>(v >> 16);
  out += static_cast<char>(v >> 8);
  out += static_cast<char>(v);
}

void put_chunk(std::string& out, const char* type, const std::string& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  put_u32(out, static_cast<std::uint32_t>(
                   crc32(0, reinterpret_cast<const Bytef*>(body.data()),
                         static_cast<uInt>(body.size()))));
}

}  // namespace

Image render(const TokenCanvas& canvas, const Palette& palette) {
  if (!canvas.full()) throw UnpopulatedCanvas("render needs a fully populated canvas");
  const auto& spec = canvas.spec();
  const int tile = spec.tile_px;
  Image img{spec.w * tile, spec.h * tile, {}};
  img.rgb.assign(static_cast<size_t>(img.width) * img.height * 3, 255);
  for (int row = 0; row < spec.h; ++row) {
    for (int col = 0; col < spec.w; ++col) {
      auto type = palette.type_of(canvas.at(row, col));
      if (!type) continue;
      const auto& rgb = kColorRgb.at(static_cast<size_t>(type->color));
      for (int y = 0; y < tile; ++y) {
        for (int x = 0; x < tile; ++x) {
          if (!inside_glyph(type->shape, x, y, tile)) continue;
          std::uint8_t* p = img.pixel(col * tile + x, row * tile + y);
          p[0] = rgb[0];
          p[1] = rgb[1];
          p[2] = rgb[2];
        }
      }
    }
  }
  return img;
}

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
  return out;
}

std::string encode_png(const Image& image) {
  std::string raw;
  raw.reserve(image.rgb.size() + static_cast<size_t>(image.height));
  const size_t stride = static_cast<size_t>(image.width) * 3;
  for (int y = 0; y < image.height; ++y) {
    raw += '\0';  // filter type: none
    raw.append(reinterpret_cast<const char*>(image.rgb.data()) + y * stride, stride);
  }
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  std::string z(len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(z.data()), &len,
                reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw Error("zlib compression failed");
  }
  z.resize(len);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(image.width));
  put_u32(ihdr, static_cast<std::uint32_t>(image.height));
  ihdr += '\x08';  // bit depth
  ihdr += '\x02';  // truecolor
  ihdr.append(3, '\0');
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", "");
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

CountTable scene_counts(const TokenCanvas& canvas, std::span<const SegmentSlice> bands,
                        const Palette& palette) {
  CountTable table = CountTable::Zero(static_cast<Eigen::Index>(bands.size()),
                                      palette.object_count());
  const auto& spec = canvas.spec();
  auto tokens = canvas.populated();
  for (int pos = 0; pos < static_cast<int>(tokens.size()); ++pos) {
    const TokenId t = tokens[static_cast<size_t>(pos)];
    if (t == kBackground) continue;
    const int row = pos / spec.w;
    for (size_t i = 0; i < bands.size(); ++i) {
      if (row >= bands[i].row_start && row < bands[i].row_end) {
        ++table(static_cast<Eigen::Index>(i), t - 1);
        break;
      }
    }
  }
  return table;
}

}  // namespace gridar
