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
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridar/guidance.hpp"
#include "gridar/model.hpp"
#include "gridar/verification.hpp"

namespace gridar {

enum class AllRejectedPolicy { retry_once_then_accept_all, accept_all, abort };

std::string to_string(AllRejectedPolicy policy);
AllRejectedPolicy parse_all_rejected_policy(const std::string& name);

/// Stage geometry and policies for one GridAR run.
///
/// Stage 1 draws R1 opening bands of h/R1 rows per start canvas. Stage 2
/// extends every anchor to h/R2 rows and verifies them as R1/R2 grids of R2
/// cells. Stage 3 completes the images. Each start canvas ends with R1 finals.
struct StagePlan {
  int R1 = 4;
  int R2 = 2;
  int n_start_canvases = 1;
  std::set<int> reformulate_at = {1};  ///< subset of {1, 2}
  GuidanceConfig guidance;
  AllRejectedPolicy all_rejected_policy = AllRejectedPolicy::retry_once_then_accept_all;

  int final_count() const { return n_start_canvases * R1; }
  /// Throws InvalidPlan when the plan does not fit `spec`.
  void validate(const CanvasSpec& spec) const;
};

struct ForwardPasses {
  std::int64_t uncond = 0;
  std::int64_t original = 0;
  std::int64_t reformulated = 0;

  std::int64_t total() const { return uncond + original + reformulated; }
  ForwardPasses& operator+=(const ForwardPasses& o);
  friend bool operator==(const ForwardPasses&, const ForwardPasses&) = default;
};

/// Cost of one run. Tokens drawn while regenerating an all-rejected stage go
/// to the retry_* fields so generated_tokens stays N*h*w.
struct BudgetLedger {
  std::int64_t generated_tokens = 0;
  ForwardPasses forward;
  /// Generated tokens decoded with a reformulated prompt in effect.
  std::int64_t reformulated_tokens = 0;
  std::int64_t retry_tokens = 0;
  ForwardPasses retry_forward;
  /// Anchor tokens replayed into freshly opened sessions.
  std::int64_t prefill_tokens = 0;
  std::int64_t verifier_calls = 0;
  std::int64_t verifier_failures = 0;
  std::int64_t orm_calls = 0;
  std::int64_t rejections = 0;
  std::int64_t replacements = 0;
  std::int64_t forced_accepts = 0;
  double wall_clock = 0.0;  ///< seconds

  BudgetLedger& operator+=(const BudgetLedger& o);
  /// wall_clock is left out unless asked for, so reports stay reproducible.
  nlohmann::ordered_json to_json(bool with_wall_clock = false) const;
};

/// One link of a candidate's provenance: generated at (stage, slot) with the
/// given retry attempt, extending the previous-stage candidate `anchor_from`.
struct Origin {
  int canvas = 0;
  int stage = 1;
  int slot = 0;
  int attempt = 0;
  int anchor_from = -1;

  friend bool operator==(const Origin&, const Origin&) = default;
};

enum class CandidateStatus { active, rejected, anchor };

struct CandidateState {
  TokenSequence tokens;
  std::vector<Origin> origin;
  CandidateStatus status = CandidateStatus::active;
  /// Reformulated prompt in effect for this lineage, if any.
  std::shared_ptr<const ScenePrompt> reformulated;
  /// Survived a boundary only through the all-rejected fallback.
  bool forced = false;
};

struct AuditEvent {
  int canvas = 0;
  int stage = 0;
  int slot = -1;
  std::string kind;
  std::string detail;
};

struct Outcome {
  std::vector<CandidateState> finals;
  std::vector<OrmScore> scores;
  int best = 0;
  BudgetLedger ledger;
  std::vector<AuditEvent> audit;

  const CandidateState& best_candidate() const { return finals.at(static_cast<size_t>(best)); }
  double best_score() const;
};

/// Where per-slot generation costs are tallied.
struct Tally {
  std::int64_t tokens = 0;
  std::int64_t reformulated_tokens = 0;
  std::int64_t prefill = 0;
  ForwardPasses forward;
};

/// Seeded substream for one generation slot, keyed by (canvas, stage, slot,
/// attempt).
Rng slot_rng(std::uint64_t seed, const Origin& origin);

/// Extends `prefix` to `target_length` tokens, sampling each token from the
/// guided logits of `bundle` under `guidance`. Unconditional and original
/// branches are always evaluated; the reformulated branch is evaluated in
/// three-way mode once `bundle.reformulated` is set, and replaces the
/// original branch in replacement mode.
TokenSequence sample_continuation(const ArModel& model, const PromptBundle& bundle,
                                  const GuidanceConfig& guidance,
                                  std::span<const TokenId> prefix, int target_length, Rng& rng,
                                  Tally& tally);

/// R1 independent opening bands of (h/R1)*w tokens for start canvas `canvas`.
std::vector<TokenSequence> generate_band_candidates(const ArModel& model,
                                                    const PromptBundle& bundle, int R1,
                                                    const GuidanceConfig& guidance,
                                                    std::uint64_t seed, Tally& tally,
                                                    int canvas = 0, int attempt = 0,
                                                    int threads = 1);

/// For each slot, the index of the candidate it keeps: its own when possible,
/// otherwise an independent uniform draw among the possible slots (drawn in
/// slot order). Throws AllRejected when no verdict is possible.
std::vector<int> replacement_sources(std::span<const Verdict> verdicts, Rng& rng);

/// Anchors after replacing every impossible candidate.
std::vector<TokenSequence> replace_rejected(std::span<const TokenSequence> candidates,
                                            std::span<const Verdict> verdicts, Rng& rng);

/// Extends each anchor to `target_length` tokens under its own bundle.
/// Slot i draws from slot_rng(seed, Origin{canvas, stage, i, attempt}).
std::vector<TokenSequence> continue_from_anchors(const ArModel& model,
                                                 std::span<const TokenSequence> anchors,
                                                 std::span<const PromptBundle> bundles,
                                                 int target_length,
                                                 const GuidanceConfig& guidance,
                                                 std::uint64_t seed, int stage,
                                                 std::span<Tally> tallies, int canvas = 0,
                                                 int attempt = 0, int threads = 1);

/// Full GridAR run. `reformulator` may be null, in which case reformulations
/// come from the verifier when it offers them. `threads` only changes
/// scheduling; outcomes are identical for any value.
Outcome run_gridar(const StagePlan& plan, const ScenePrompt& prompt, const ArModel& model,
                   Verifier& verifier, Reformulator* reformulator, OutcomeReward& orm,
                   std::uint64_t seed, int threads = 1);

/// N independent full samples, best by ORM.
Outcome run_best_of_n(int N, const ScenePrompt& prompt, const ArModel& model,
                      const GuidanceConfig& guidance, OutcomeReward& orm, std::uint64_t seed,
                      int threads = 1);

}  // namespace gridar
