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

#include "gridar/canvas.hpp"

#include <algorithm>
#include <string>

#include "gridar/errors.hpp"

namespace gridar {

void CanvasSpec::validate() const {
  if (h < 1 || w < 1) {
    throw ShapeMismatch("canvas needs h >= 1 and w >= 1, got " +
                        std::to_string(h) + "x" + std::to_string(w));
  }
  if (K < 2) throw ShapeMismatch("codebook needs K >= 2");
  if (tile_px < 1) throw ShapeMismatch("tile_px must be positive");
}

TokenCanvas::TokenCanvas(const CanvasSpec& spec)
    : spec_(spec), tokens_(static_cast<size_t>(spec.token_count()), kUnpopulated) {
  spec_.validate();
}

TokenCanvas::TokenCanvas(const CanvasSpec& spec, std::span<const TokenId> prefix)
    : TokenCanvas(spec) {
  if (static_cast<int>(prefix.size()) > spec.token_count()) {
    throw ShapeMismatch("prefix longer than canvas");
  }
  for (TokenId t : prefix) push(t);
}

TokenId TokenCanvas::at(int row, int col) const {
  if (row < 0 || row >= spec_.h || col < 0 || col >= spec_.w) {
    throw OutOfRange("cell (" + std::to_string(row) + "," +
                     std::to_string(col) + ") outside canvas");
  }
  return tokens_[static_cast<size_t>(raster_index(spec_, row, col))];
}

void TokenCanvas::push(TokenId token) {
  if (full()) throw ShapeMismatch("canvas already full");
  if (token < 0 || token >= spec_.K) {
    throw OutOfRange("token id " + std::to_string(token) + " outside [0, K)");
  }
  tokens_[static_cast<size_t>(filled_++)] = token;
}

std::vector<SegmentSlice> partition_rows(const CanvasSpec& spec, int R) {
  spec.validate();
  if (R < 1 || spec.h % R != 0) {
    throw IndivisibleCanvas("cannot split " + std::to_string(spec.h) +
                            " rows into " + std::to_string(R) + " bands");
  }
  const int rows = spec.h / R;
  std::vector<SegmentSlice> bands;
  bands.reserve(static_cast<size_t>(R));
  for (int i = 0; i < R; ++i) {
    bands.push_back({i, i * rows, (i + 1) * rows, rows * spec.w});
  }
  return bands;
}

TokenCanvas compose_grid(std::span<const TokenSequence> segments,
                         const CanvasSpec& spec) {
  spec.validate();
  if (segments.empty()) throw ShapeMismatch("no segments to compose");
  const size_t L = segments.front().size();
  for (const auto& s : segments) {
    if (s.size() != L) throw ShapeMismatch("segments differ in length");
  }
  const int R = static_cast<int>(segments.size());
  if (static_cast<long>(R) * static_cast<long>(L) != spec.token_count() ||
      spec.h % R != 0) {
    throw ShapeMismatch(std::to_string(R) + " segments of " +
                        std::to_string(L) + " tokens do not tile a " +
                        std::to_string(spec.h) + "x" + std::to_string(spec.w) +
                        " canvas");
  }
  TokenCanvas canvas(spec);
  for (const auto& s : segments) {
    for (TokenId t : s) canvas.push(t);
  }
  return canvas;
}

int band_of(const CanvasSpec& spec, int position,
            std::span<const SegmentSlice> bands) {
  if (position < 0 || position >= spec.token_count()) {
    throw OutOfRange("position " + std::to_string(position) +
                     " outside canvas");
  }
  const int row = position / spec.w;
  auto it = std::find_if(bands.begin(), bands.end(), [row](const auto& b) {
    return row >= b.row_start && row < b.row_end;
  });
  if (it == bands.end()) throw OutOfRange("no band covers row " + std::to_string(row));
  return it->band_index;
}

TokenSequence slice_band(const TokenCanvas& canvas, const SegmentSlice& slice) {
  const auto& spec = canvas.spec();
  const int begin = raster_index(spec, slice.row_start, 0);
  const int end = raster_index(spec, slice.row_end, 0);
  if (slice.row_start < 0 || slice.row_end > spec.h || begin > end) {
    throw OutOfRange("slice outside canvas");
  }
  if (end > canvas.filled()) throw UnpopulatedCanvas("slice not populated");
  auto toks = canvas.tokens();
  return TokenSequence(toks.begin() + begin, toks.begin() + end);
}

}  // namespace gridar
