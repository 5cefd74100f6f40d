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

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gridar/canvas.hpp"
#include "gridar/prompt.hpp"

namespace gridar {

/// 8-bit RGB raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  std::uint8_t* pixel(int x, int y) {
    return rgb.data() + 3 * (static_cast<size_t>(y) * width + x);
  }
  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + 3 * (static_cast<size_t>(y) * width + x);
  }
};

/// Draws each token as a tile_px square: white for background, otherwise a
/// filled square, disc or triangle in the object's color.
Image render(const TokenCanvas& canvas, const Palette& palette);

/// Binary P6 encoding.
std::string encode_ppm(const Image& image);
/// 8-bit RGB PNG (zlib-compressed, no filtering).
std::string encode_png(const Image& image);

std::string base64_encode(std::span<const std::uint8_t> bytes);
inline std::string base64_encode(const std::string& bytes) {
  return base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()),
                                 bytes.size()));
}

/// Object tallies: one row per band, one column per palette object
/// (column = token id - 1).
using CountTable = Eigen::MatrixXi;

/// Counts objects in the populated prefix of `canvas`, per band.
CountTable scene_counts(const TokenCanvas& canvas, std::span<const SegmentSlice> bands,
                        const Palette& palette);

}  // namespace gridar
