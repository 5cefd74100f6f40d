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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridar/canvas.hpp"
#include "gridar/prompt.hpp"
#include "gridar/render.hpp"

namespace gridar {

enum class Judgment { possible, impossible };

std::string to_string(Judgment j);

struct Verdict {
  int candidate_index = 0;
  Judgment judgment = Judgment::possible;
  std::string reason;

  bool possible() const { return judgment == Judgment::possible; }
};

struct OrmScore {
  int candidate_index = 0;
  double score = 0.0;
};

/// A grid image as the verifier sees it: `canvas` stacks `rows` cells, and
/// each cell shows the top h/rows latent rows of one candidate image.
struct GridView {
  TokenCanvas canvas;
  int rows = 1;
  int stage = 1;

  int cell_rows() const { return canvas.spec().h / rows; }
  /// Cell `i` re-based as the opening prefix of a final canvas.
  TokenCanvas cell(int i) const;
};

struct Inspection {
  std::vector<Verdict> verdicts;
  /// Per-cell reformulated prompts. Empty when the verifier offers none;
  /// otherwise one entry per cell (nullopt where none applies).
  std::vector<std::optional<ScenePrompt>> reformulations;
};

/// Judges partial candidates laid out in a grid.
class Verifier {
 public:
  virtual ~Verifier() = default;
  virtual std::string name() const = 0;
  /// False for verifiers that never reject; the pipeline skips calling them.
  virtual bool prunes() const { return true; }
  virtual Inspection inspect(const GridView& grid, const ScenePrompt& prompt,
                             bool want_reformulation) = 0;
};

/// Rewrites a prompt with a layout that fits an accepted partial candidate.
class Reformulator {
 public:
  virtual ~Reformulator() = default;
  /// `visible` holds the candidate's populated opening rows.
  virtual ScenePrompt reformulate(const ScenePrompt& prompt, const TokenCanvas& visible) = 0;
};

/// Scores finished images; higher is better.
class OutcomeReward {
 public:
  virtual ~OutcomeReward() = default;
  virtual double score(const TokenCanvas& image, const ScenePrompt& prompt) = 0;
};

// --- oracles over synthetic scenes -----------------------------------------

/// Judgment for one partial view whose populated prefix covers `visible_rows`
/// full rows of the final canvas. Impossible iff a required type already
/// exceeds its total, a type absent from the prompt appears, or a directive
/// band lying inside the visible rows misses its quota.
Verdict judge_partial(const TokenCanvas& view, int visible_rows, const ScenePrompt& prompt,
                      const Palette& palette, int candidate_index = 0);

/// Judges each of the R cells of a composed grid independently.
std::vector<Verdict> oracle_judge(const TokenCanvas& grid, const ScenePrompt& prompt, int R,
                                  const Palette& palette);

/// Layout reformulation from the counts of an accepted candidate.
/// `visible_counts` has one row per visible latent row (rows 0..v-1 of the
/// final canvas). Visible bands are pinned to what was drawn; the rest of the
/// canvas receives the remainder. Original directives are split at the
/// visible boundary.
ScenePrompt oracle_reformulate(const ScenePrompt& prompt, const CountTable& visible_counts,
                               int h, const Palette& palette);

/// 0 for an exact match, otherwise minus the total count error (per-type
/// deviation, spurious objects and per-band deviation for directives).
OrmScore oracle_orm(const TokenCanvas& image, const ScenePrompt& prompt,
                    const Palette& palette, int candidate_index = 0);

/// Highest score wins; ties go to the lowest candidate index.
int select_best(std::span<const OrmScore> scores);

class OracleVerifier final : public Verifier {
 public:
  explicit OracleVerifier(Palette palette) : palette_(palette) {}
  std::string name() const override { return "oracle"; }
  Inspection inspect(const GridView& grid, const ScenePrompt& prompt,
                     bool want_reformulation) override;

 private:
  Palette palette_;
};

/// Oracle whose verdicts are flipped with probability `error_rate`. The flip
/// stream is keyed by the grid contents so results do not depend on call order.
class NoisyOracleVerifier final : public Verifier {
 public:
  NoisyOracleVerifier(Palette palette, double error_rate, std::uint64_t seed)
      : oracle_(palette), error_rate_(error_rate), seed_(seed) {}
  std::string name() const override { return "noisy_oracle"; }
  Inspection inspect(const GridView& grid, const ScenePrompt& prompt,
                     bool want_reformulation) override;

 private:
  OracleVerifier oracle_;
  double error_rate_;
  std::uint64_t seed_;
};

/// Accepts everything; disables pruning.
class AcceptAllVerifier final : public Verifier {
 public:
  std::string name() const override { return "accept_all"; }
  bool prunes() const override { return false; }
  Inspection inspect(const GridView& grid, const ScenePrompt& prompt,
                     bool want_reformulation) override;
};

class OracleReformulator final : public Reformulator {
 public:
  explicit OracleReformulator(Palette palette) : palette_(palette) {}
  ScenePrompt reformulate(const ScenePrompt& prompt, const TokenCanvas& visible) override;

 private:
  Palette palette_;
};

class OracleOrm final : public OutcomeReward {
 public:
  explicit OracleOrm(Palette palette) : palette_(palette) {}
  double score(const TokenCanvas& image, const ScenePrompt& prompt) override {
    return oracle_orm(image, prompt, palette_).score;
  }

 private:
  Palette palette_;
};

}  // namespace gridar
