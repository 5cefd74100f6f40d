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

#include "gridar/verification.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>

#include "gridar/errors.hpp"
#include "gridar/rng.hpp"

namespace gridar {
namespace {

int object_index(const Palette& palette, ObjectType t) { return palette.token_of(t) - 1; }

// Per-row object counts for rows [0, rows) of the populated prefix.
CountTable row_counts(const TokenCanvas& view, int rows, const Palette& palette) {
  const auto& spec = view.spec();
  CountTable table = CountTable::Zero(rows, palette.object_count());
  auto tokens = view.populated();
  const int limit = std::min(static_cast<int>(tokens.size()), rows * spec.w);
  for (int pos = 0; pos < limit; ++pos) {
    const TokenId t = tokens[static_cast<size_t>(pos)];
    if (t != kBackground) ++table(pos / spec.w, t - 1);
  }
  return table;
}

int band_sum(const CountTable& rows, int object, int row_start, int row_end) {
  row_end = std::min<int>(row_end, static_cast<int>(rows.rows()));
  int n = 0;
  for (int r = row_start; r < row_end; ++r) n += rows(r, object);
  return n;
}

}  // namespace

std::string to_string(Judgment j) {
  return j == Judgment::possible ? "possible" : "impossible";
}

TokenCanvas GridView::cell(int i) const {
  const auto bands = partition_rows(canvas.spec(), rows);
  const auto tokens = slice_band(canvas, bands.at(static_cast<size_t>(i)));
  return TokenCanvas(canvas.spec(), tokens);
}

Verdict judge_partial(const TokenCanvas& view, int visible_rows, const ScenePrompt& prompt,
                      const Palette& palette, int candidate_index) {
  const auto& spec = view.spec();
  if (visible_rows < 0 || visible_rows > spec.h || view.filled() < visible_rows * spec.w) {
    throw UnpopulatedCanvas("partial view does not cover its visible rows");
  }
  const CountTable rows = row_counts(view, visible_rows, palette);
  const Eigen::VectorXi totals = rows.colwise().sum().transpose();
  Verdict v{candidate_index, Judgment::possible, {}};

  for (int obj = 0; obj < palette.object_count(); ++obj) {
    if (totals(obj) == 0) continue;
    const ObjectType type = *palette.type_of(obj + 1);
    if (!prompt.requires_type(type)) {
      v.judgment = Judgment::impossible;
      v.reason = "unrequested " + describe(type, totals(obj));
      return v;
    }
    if (totals(obj) > prompt.total(type)) {
      v.judgment = Judgment::impossible;
      v.reason = "too many: " + describe(type, totals(obj));
      return v;
    }
  }
  for (const auto& d : prompt.directives) {
    if (d.row_end > visible_rows) continue;
    for (const auto& q : d.quotas) {
      const int drawn = band_sum(rows, object_index(palette, q.type), d.row_start, d.row_end);
      if (drawn != q.count) {
        v.judgment = Judgment::impossible;
        v.reason = "rows " + std::to_string(d.row_start) + "-" +
                   std::to_string(d.row_end - 1) + " hold " + describe(q.type, drawn);
        return v;
      }
    }
  }
  return v;
}

std::vector<Verdict> oracle_judge(const TokenCanvas& grid, const ScenePrompt& prompt, int R,
                                  const Palette& palette) {
  if (!grid.full()) throw UnpopulatedCanvas("grid must be fully populated");
  GridView view{grid, R, 0};
  const int visible = view.cell_rows();
  std::vector<Verdict> out;
  out.reserve(static_cast<size_t>(R));
  for (int i = 0; i < R; ++i) {
    out.push_back(judge_partial(view.cell(i), visible, prompt, palette, i));
  }
  return out;
}

ScenePrompt oracle_reformulate(const ScenePrompt& prompt, const CountTable& visible_counts,
                               int h, const Palette& palette) {
  const int visible = static_cast<int>(visible_counts.rows());
  if (visible > h) throw OutOfRange("visible rows exceed canvas");
  if (visible_counts.cols() != palette.object_count()) {
    throw ShapeMismatch("count table does not match the palette");
  }
  // Ordered by (row_start, row_end); quotas keep requirement order.
  std::map<std::pair<int, int>, std::vector<Requirement>> bands;
  auto add = [&](int a, int b, ObjectType t, int count) {
    if (a >= b) return;
    if (count < 0) {
      throw InfeasibleRemainder("drawn " + describe(t, 2) + " exceed the quota for rows " +
                                std::to_string(a) + "-" + std::to_string(b - 1));
    }
    bands[{a, b}].push_back({count, t});
  };

  for (const auto& req : prompt.requirements) {
    const ObjectType t = req.type;
    const int obj = object_index(palette, t);
    if (prompt.has_directives_for(t)) {
      for (const auto& d : prompt.directives) {
        const auto q = d.quota(t);
        if (!q) continue;
        if (d.row_end <= visible || d.row_start >= visible) {
          add(d.row_start, d.row_end, t, *q);
        } else {
          const int drawn = band_sum(visible_counts, obj, d.row_start, visible);
          add(d.row_start, visible, t, drawn);
          add(visible, d.row_end, t, *q - drawn);
        }
      }
    } else {
      const int drawn = band_sum(visible_counts, obj, 0, visible);
      if (visible >= h) {
        add(0, h, t, req.count);
      } else {
        add(0, visible, t, drawn);
        add(visible, h, t, req.count - drawn);
      }
    }
  }

  ScenePrompt out;
  out.requirements = prompt.requirements;
  for (auto& [range, quotas] : bands) {
    out.directives.push_back({range.first, range.second, std::move(quotas)});
  }
  return out;
}

OrmScore oracle_orm(const TokenCanvas& image, const ScenePrompt& prompt,
                    const Palette& palette, int candidate_index) {
  if (!image.full()) throw UnpopulatedCanvas("ORM needs a finished image");
  const int h = image.spec().h;
  const CountTable rows = row_counts(image, h, palette);
  const Eigen::VectorXi totals = rows.colwise().sum().transpose();
  int error = 0;
  for (int obj = 0; obj < palette.object_count(); ++obj) {
    const ObjectType type = *palette.type_of(obj + 1);
    if (prompt.requires_type(type)) {
      error += std::abs(totals(obj) - prompt.total(type));
    } else {
      error += totals(obj);
    }
  }
  for (const auto& d : prompt.directives) {
    for (const auto& q : d.quotas) {
      error += std::abs(band_sum(rows, object_index(palette, q.type), d.row_start, d.row_end) -
                        q.count);
    }
  }
  return {candidate_index, -static_cast<double>(error)};
}

int select_best(std::span<const OrmScore> scores) {
  if (scores.empty()) throw OutOfRange("no candidates to select from");
  const OrmScore* best = &scores.front();
  for (const auto& s : scores) {
    if (s.score > best->score ||
        (s.score == best->score && s.candidate_index < best->candidate_index)) {
      best = &s;
    }
  }
  return best->candidate_index;
}

Inspection OracleVerifier::inspect(const GridView& grid, const ScenePrompt& prompt,
                                   bool want_reformulation) {
  Inspection out;
  out.verdicts = oracle_judge(grid.canvas, prompt, grid.rows, palette_);
  if (want_reformulation) {
    const int visible = grid.cell_rows();
    for (int i = 0; i < grid.rows; ++i) {
      if (!out.verdicts[static_cast<size_t>(i)].possible()) {
        out.reformulations.emplace_back();
        continue;
      }
      out.reformulations.emplace_back(oracle_reformulate(
          prompt, row_counts(grid.cell(i), visible, palette_), grid.canvas.spec().h, palette_));
    }
  }
  return out;
}

Inspection NoisyOracleVerifier::inspect(const GridView& grid, const ScenePrompt& prompt,
                                        bool want_reformulation) {
  Inspection out = oracle_.inspect(grid, prompt, false);
  std::uint64_t key = mix_seed(seed_, {static_cast<std::uint64_t>(grid.stage)});
  for (TokenId t : grid.canvas.tokens()) key = mix_seed(key, {static_cast<std::uint64_t>(t)});
  Rng rng(key);
  for (auto& v : out.verdicts) {
    if (rng.uniform() < error_rate_) {
      v.judgment = v.possible() ? Judgment::impossible : Judgment::possible;
      v.reason = "flipped";
    }
  }
  (void)want_reformulation;  // the pipeline's reformulator covers this verifier
  return out;
}

Inspection AcceptAllVerifier::inspect(const GridView& grid, const ScenePrompt&, bool) {
  Inspection out;
  for (int i = 0; i < grid.rows; ++i) out.verdicts.push_back({i, Judgment::possible, {}});
  return out;
}

ScenePrompt OracleReformulator::reformulate(const ScenePrompt& prompt,
                                            const TokenCanvas& visible) {
  const int rows = visible.filled() / visible.spec().w;
  return oracle_reformulate(prompt, row_counts(visible, rows, palette_), visible.spec().h,
                            palette_);
}

}  // namespace gridar
