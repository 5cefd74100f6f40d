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

#include "gridar/prompt.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "gridar/errors.hpp"

namespace gridar {
namespace {

std::vector<std::string_view> split(std::string_view s, std::string_view sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + sep.size();
  }
}

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw PromptParseError("expected integer " + std::string(what) + ", got '" +
                           std::string(s) + "'");
  }
  return v;
}

Requirement parse_requirement(std::string_view s) {
  auto words = split(s, " ");
  if (words.size() != 3) {
    throw PromptParseError("expected '<count> <color> <shape>', got '" +
                           std::string(s) + "'");
  }
  Requirement r;
  r.count = parse_int(words[0], "count");
  auto color = std::find(kColorNames.begin(), kColorNames.end(), words[1]);
  if (color == kColorNames.end()) {
    throw PromptParseError("unknown color '" + std::string(words[1]) + "'");
  }
  r.type.color = static_cast<int>(color - kColorNames.begin());
  std::string_view shape = words[2];
  const bool plural = r.count != 1;
  if (plural) {
    if (!shape.ends_with('s')) {
      throw PromptParseError("expected plural shape in '" + std::string(s) + "'");
    }
    shape.remove_suffix(1);
  }
  auto it = std::find(kShapeNames.begin(), kShapeNames.end(), shape);
  if (it == kShapeNames.end()) {
    throw PromptParseError("unknown shape '" + std::string(words[2]) + "'");
  }
  r.type.shape = static_cast<int>(it - kShapeNames.begin());
  return r;
}

std::vector<Requirement> parse_requirements(std::string_view s) {
  std::vector<Requirement> out;
  for (auto part : split(s, " and ")) out.push_back(parse_requirement(part));
  return out;
}

std::string format_requirements(const std::vector<Requirement>& reqs) {
  std::string out;
  for (size_t i = 0; i < reqs.size(); ++i) {
    if (i) out += " and ";
    out += describe(reqs[i].type, reqs[i].count);
  }
  return out;
}

}  // namespace

std::string describe(ObjectType type, int count) {
  std::string out = std::to_string(count);
  out += ' ';
  out += kColorNames.at(static_cast<size_t>(type.color));
  out += ' ';
  out += kShapeNames.at(static_cast<size_t>(type.shape));
  if (count != 1) out += 's';
  return out;
}

TokenId Palette::token_of(ObjectType t) const {
  if (!contains(t)) throw OutOfRange("object type outside palette");
  return 1 + t.color * n_shapes + t.shape;
}

std::optional<ObjectType> Palette::type_of(TokenId token) const {
  if (token < 0 || token >= codebook_size()) {
    throw OutOfRange("token " + std::to_string(token) + " outside palette");
  }
  if (token == kBackground) return std::nullopt;
  return ObjectType{(token - 1) / n_shapes, (token - 1) % n_shapes};
}

void Palette::validate() const {
  if (n_colors < 1 || n_colors > static_cast<int>(kColorNames.size()) ||
      n_shapes < 1 || n_shapes > static_cast<int>(kShapeNames.size())) {
    throw InvalidPrompt("palette must have 1-4 colors and 1-3 shapes");
  }
}

std::optional<int> Directive::quota(ObjectType t) const {
  for (const auto& q : quotas) {
    if (q.type == t) return q.count;
  }
  return std::nullopt;
}

int ScenePrompt::total(ObjectType t) const {
  int n = 0;
  for (const auto& r : requirements) {
    if (r.type == t) n += r.count;
  }
  return n;
}

bool ScenePrompt::requires_type(ObjectType t) const {
  return std::any_of(requirements.begin(), requirements.end(),
                     [&](const Requirement& r) { return r.type == t; });
}

const Directive* ScenePrompt::directive_for(ObjectType t, int row) const {
  for (const auto& d : directives) {
    if (d.covers(row) && d.quota(t)) return &d;
  }
  return nullptr;
}

bool ScenePrompt::has_directives_for(ObjectType t) const {
  return std::any_of(directives.begin(), directives.end(),
                     [&](const Directive& d) { return d.quota(t).has_value(); });
}

std::string ScenePrompt::text() const {
  if (!external_text.empty()) return external_text;
  std::string out = format_requirements(requirements);
  for (size_t i = 0; i < directives.size(); ++i) {
    const auto& d = directives[i];
    std::string_view place = "middle";
    if (d.row_start == 0) {
      place = "top";
    } else if (i + 1 == directives.size()) {
      place = "bottom";
    }
    out += "; ";
    out += place;
    out += " (rows " + std::to_string(d.row_start) + "-" +
           std::to_string(d.row_end - 1) + "): ";
    out += format_requirements(d.quotas);
  }
  return out;
}

ScenePrompt ScenePrompt::parse(std::string_view text) {
  auto parts = split(text, "; ");
  ScenePrompt p;
  p.requirements = parse_requirements(parts.front());
  for (size_t i = 1; i < parts.size(); ++i) {
    std::string_view part = parts[i];
    auto open = part.find(" (rows ");
    auto close = part.find("): ");
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
      throw PromptParseError("malformed directive '" + std::string(part) + "'");
    }
    auto place = part.substr(0, open);
    if (place != "top" && place != "middle" && place != "bottom") {
      throw PromptParseError("unknown placement '" + std::string(place) + "'");
    }
    auto range = part.substr(open + 7, close - open - 7);
    auto dash = range.find('-');
    if (dash == std::string_view::npos) {
      throw PromptParseError("malformed row range '" + std::string(range) + "'");
    }
    Directive d;
    d.row_start = parse_int(range.substr(0, dash), "row");
    d.row_end = parse_int(range.substr(dash + 1), "row") + 1;
    d.quotas = parse_requirements(part.substr(close + 3));
    p.directives.push_back(std::move(d));
  }
  return p;
}

void ScenePrompt::validate(const Palette& palette, int h) const {
  std::map<ObjectType, int> seen;
  for (const auto& r : requirements) {
    if (r.count < 0) throw InvalidPrompt("negative count");
    if (!palette.contains(r.type)) throw InvalidPrompt("type outside palette");
    if (seen[r.type]++) throw InvalidPrompt("duplicate requirement for one type");
  }
  std::map<ObjectType, std::vector<const Directive*>> by_type;
  for (const auto& d : directives) {
    if (d.row_start < 0 || d.row_end <= d.row_start || (h > 0 && d.row_end > h)) {
      throw InvalidPrompt("directive band out of range");
    }
    std::map<ObjectType, int> in_band;
    for (const auto& q : d.quotas) {
      if (q.count < 0) throw InvalidPrompt("negative directive quota");
      if (!requires_type(q.type)) {
        throw InvalidPrompt("directive names a type absent from the requirements");
      }
      if (in_band[q.type]++) throw InvalidPrompt("two quotas for one type in a band");
      by_type[q.type].push_back(&d);
    }
  }
  for (auto& [type, ds] : by_type) {
    int sum = 0;
    for (size_t i = 0; i < ds.size(); ++i) {
      sum += *ds[i]->quota(type);
      for (size_t j = i + 1; j < ds.size(); ++j) {
        if (ds[i]->row_start < ds[j]->row_end && ds[j]->row_start < ds[i]->row_end) {
          throw InvalidPrompt("overlapping directive bands for one type");
        }
      }
    }
    if (sum != total(type)) {
      throw InvalidPrompt("directive quotas for " + describe(type, 2) +
                          " do not sum to the required count");
    }
  }
}

}  // namespace gridar
