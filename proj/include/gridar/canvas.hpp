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

#include <cstdint>
#include <span>
#include <vector>

namespace gridar {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

inline constexpr TokenId kUnpopulated = -1;

/// Latent grid geometry: h rows by w columns of tokens drawn from a codebook
/// of K ids. tile_px is only used by the toy renderer.
struct CanvasSpec {
  int h = 16;
  int w = 16;
  int K = 13;
  int tile_px = 8;

  int token_count() const { return h * w; }
  void validate() const;

  friend bool operator==(const CanvasSpec&, const CanvasSpec&) = default;
};

/// A horizontal band of latent rows, [row_start, row_end).
struct SegmentSlice {
  int band_index = 0;
  int row_start = 0;
  int row_end = 0;
  int token_count = 0;

  friend bool operator==(const SegmentSlice&, const SegmentSlice&) = default;
};

/// Raster-ordered token buffer with a populated prefix of length filled().
class TokenCanvas {
 public:
  TokenCanvas() = default;
  explicit TokenCanvas(const CanvasSpec& spec);
  /// Populates the prefix from `prefix`; remaining positions stay empty.
  TokenCanvas(const CanvasSpec& spec, std::span<const TokenId> prefix);

  const CanvasSpec& spec() const { return spec_; }
  int filled() const { return filled_; }
  bool full() const { return filled_ == spec_.token_count(); }

  std::span<const TokenId> tokens() const { return tokens_; }
  std::span<const TokenId> populated() const {
    return std::span<const TokenId>(tokens_).first(filled_);
  }

  TokenId at(int row, int col) const;
  void push(TokenId token);

 private:
  CanvasSpec spec_;
  std::vector<TokenId> tokens_;
  int filled_ = 0;
};

inline int raster_index(const CanvasSpec& spec, int row, int col) {
  return row * spec.w + col;
}

/// Splits the canvas into R equal row bands. Throws IndivisibleCanvas when
/// h is not a multiple of R.
std::vector<SegmentSlice> partition_rows(const CanvasSpec& spec, int R);

/// Stacks R equal-length segments top to bottom into one full canvas.
TokenCanvas compose_grid(std::span<const TokenSequence> segments,
                         const CanvasSpec& spec);

/// Band containing the row of `position`.
int band_of(const CanvasSpec& spec, int position,
            std::span<const SegmentSlice> bands);

/// Tokens of `canvas` inside `slice`, in raster order.
TokenSequence slice_band(const TokenCanvas& canvas, const SegmentSlice& slice);

}  // namespace gridar
