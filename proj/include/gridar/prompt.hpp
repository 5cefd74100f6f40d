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

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridar/canvas.hpp"

namespace gridar {

inline constexpr std::array<std::string_view, 4> kColorNames = {"red", "green", "blue",
                                                                "yellow"};
inline constexpr std::array<std::string_view, 3> kShapeNames = {"square", "circle",
                                                                "triangle"};

struct ObjectType {
  int color = 0;
  int shape = 0;

  friend auto operator<=>(const ObjectType&, const ObjectType&) = default;
};

std::string describe(ObjectType type, int count);

/// Colors x shapes plus one background token (id 0). Object (c, s) maps to
/// token 1 + c * n_shapes + s.
struct Palette {
  int n_colors = 4;
  int n_shapes = 3;

  int codebook_size() const { return 1 + n_colors * n_shapes; }
  int object_count() const { return n_colors * n_shapes; }
  bool contains(ObjectType t) const {
    return t.color >= 0 && t.color < n_colors && t.shape >= 0 && t.shape < n_shapes;
  }
  TokenId token_of(ObjectType t) const;
  /// nullopt for the background token.
  std::optional<ObjectType> type_of(TokenId token) const;
  void validate() const;
};

inline constexpr TokenId kBackground = 0;

struct Requirement {
  int count = 0;
  ObjectType type;

  friend bool operator==(const Requirement&, const Requirement&) = default;
};

/// Per-type quotas for rows [row_start, row_end) of the final canvas.
struct Directive {
  int row_start = 0;
  int row_end = 0;
  std::vector<Requirement> quotas;

  bool covers(int row) const { return row >= row_start && row < row_end; }
  std::optional<int> quota(ObjectType t) const;

  friend bool operator==(const Directive&, const Directive&) = default;
};

/// A scene description: object counts, optionally pinned to row bands.
///
/// Text grammar (what text() emits and parse() accepts):
///
///   prompt := reqs { "; " place " (rows " A "-" B "): " reqs }
///   reqs   := req { " and " req }
///   req    := COUNT " " color " " shape["s"]
///   place  := "top" | "middle" | "bottom"
///
/// Row ranges in text are inclusive. e.g.
///   "8 red squares; top (rows 0-3): 3 red squares; bottom (rows 4-15): 5 red squares"
struct ScenePrompt {
  std::vector<Requirement> requirements;
  std::vector<Directive> directives;
  /// Free text from an external reformulator; overrides text() when set.
  std::string external_text;

  int total(ObjectType t) const;
  bool requires_type(ObjectType t) const;
  /// Directive governing `t` at `row`, if any.
  const Directive* directive_for(ObjectType t, int row) const;
  bool has_directives_for(ObjectType t) const;

  std::string text() const;
  static ScenePrompt parse(std::string_view text);

  /// Throws InvalidPrompt when an invariant is broken. `h` bounds directive
  /// rows when positive.
  void validate(const Palette& palette, int h = 0) const;

  friend bool operator==(const ScenePrompt&, const ScenePrompt&) = default;
};

}  // namespace gridar
