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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <set>

#include "gridar/errors.hpp"
#include "gridar/pipeline.hpp"
#include "gridar/scene_lm.hpp"

using namespace gridar;

namespace {

const Palette kPalette;
const CanvasSpec kSpec{16, 16, 13, 8};

StagePlan plan_with(GuidanceMode mode) {
  StagePlan p;
  p.guidance.mode = mode;
  return p;
}

// Rejects every cell on its first `reject_calls` calls, then defers to the oracle.
class StubbornVerifier final : public Verifier {
 public:
  explicit StubbornVerifier(int reject_calls) : left_(reject_calls) {}
  std::string name() const override { return "stubborn"; }
  Inspection inspect(const GridView& grid, const ScenePrompt& prompt, bool want) override {
    ++calls;
    if (left_-- > 0) {
      Inspection out;
      for (int i = 0; i < grid.rows; ++i) out.verdicts.push_back({i, Judgment::impossible, {}});
      return out;
    }
    return OracleVerifier(kPalette).inspect(grid, prompt, want);
  }
  int calls = 0;

 private:
  int left_;
};

class BrokenVerifier final : public Verifier {
 public:
  std::string name() const override { return "broken"; }
  Inspection inspect(const GridView&, const ScenePrompt&, bool) override {
    throw TransportError("connection refused");
  }
};

// Returns the wrong number of verdicts.
class ShortVerifier final : public Verifier {
 public:
  std::string name() const override { return "short"; }
  Inspection inspect(const GridView& grid, const ScenePrompt&, bool) override {
    Inspection out;
    for (int i = 0; i + 1 < grid.rows; ++i) out.verdicts.push_back({i, Judgment::impossible, {}});
    return out;
  }
};

// Reference two-way sampler built straight from cfg_combine.
TokenSequence reference_two_way(const ArModel& model, const ScenePrompt& prompt, double s,
                                std::span<const TokenId> prefix, int target, Rng& rng) {
  const PromptBundle b(prompt);
  auto su = model.open(b.unconditional());
  auto so = model.open(b.original_condition());
  su.extend(prefix);
  so.extend(prefix);
  TokenSequence out(prefix.begin(), prefix.end());
  for (int pos = static_cast<int>(prefix.size()); pos < target; ++pos) {
    const Logits g = cfg_combine(model.next_logits(so, pos), model.next_logits(su, pos), s);
    const TokenId t = sample_token(g, model.temperature(), rng);
    su.append(t);
    so.append(t);
    out.push_back(t);
  }
  return out;
}

std::string audit_text(const Outcome& o) {
  std::string s;
  for (const auto& e : o.audit) {
    s += std::to_string(e.canvas) + "/" + std::to_string(e.stage) + "/" + std::to_string(e.slot) +
         " " + e.kind + " " + e.detail + "\n";
  }
  return s;
}

}  // namespace

TEST_CASE("stage plans are validated") {
  StagePlan p;
  CHECK_NOTHROW(p.validate(kSpec));
  CHECK(p.final_count() == 4);
  p.R1 = 3;
  CHECK_THROWS_AS(p.validate(kSpec), InvalidPlan);
  p = StagePlan{};
  p.R1 = 4;
  p.R2 = 3;
  CHECK_THROWS_AS(p.validate(kSpec), InvalidPlan);
  p = StagePlan{};
  p.reformulate_at = {3};
  CHECK_THROWS_AS(p.validate(kSpec), InvalidPlan);
  p = StagePlan{};
  p.n_start_canvases = 0;
  CHECK_THROWS_AS(p.validate(kSpec), InvalidPlan);
  for (auto policy : {AllRejectedPolicy::retry_once_then_accept_all, AllRejectedPolicy::accept_all,
                      AllRejectedPolicy::abort}) {
    CHECK(parse_all_rejected_policy(to_string(policy)) == policy);
  }
}

TEST_CASE("band candidates have the stage-1 geometry") {
  const SceneLM lm(kSpec);
  const PromptBundle b(ScenePrompt::parse("8 red squares"));
  Tally tally;
  const auto four = generate_band_candidates(lm, b, 4, GuidanceConfig{}, 1, tally);
  REQUIRE(four.size() == 4);
  for (const auto& s : four) CHECK(s.size() == 64);
  CHECK(tally.tokens == 256);
  CHECK(tally.forward.total() == 512);
  Tally one_tally;
  const auto one = generate_band_candidates(lm, b, 1, GuidanceConfig{}, 1, one_tally);
  REQUIRE(one.size() == 1);
  CHECK(one[0].size() == 256);

  Tally t1, t2;
  CHECK(generate_band_candidates(lm, b, 4, GuidanceConfig{}, 9, t1, 0, 0, 1) ==
        generate_band_candidates(lm, b, 4, GuidanceConfig{}, 9, t2, 0, 0, 4));
  // Guided openings for this prompt are nearly fixed, so compare unguided draws.
  GuidanceConfig plain;
  plain.s_o = 0.0;
  Tally t3;
  CHECK(generate_band_candidates(lm, b, 4, plain, 9, t3, 0, 1) !=
        generate_band_candidates(lm, b, 4, plain, 9, t1, 0, 0));
  CHECK(generate_band_candidates(lm, b, 4, plain, 9, t3, 1, 0) !=
        generate_band_candidates(lm, b, 4, plain, 9, t1, 0, 0));
}

TEST_CASE("continuations keep their anchors and fill the stage") {
  const SceneLM lm(kSpec);
  const PromptBundle b(ScenePrompt::parse("5 blue circles"));
  Tally tally;
  const auto quarters = generate_band_candidates(lm, b, 4, GuidanceConfig{}, 3, tally);
  const std::vector<PromptBundle> bundles(4, b);

  std::vector<Tally> t2(4);
  const auto halves = continue_from_anchors(lm, quarters, bundles, 128, GuidanceConfig{}, 3, 2, t2);
  std::vector<Tally> t3(4);
  const auto fulls = continue_from_anchors(lm, halves, bundles, 256, GuidanceConfig{}, 3, 3, t3);
  for (size_t i = 0; i < 4; ++i) {
    CHECK(t2[i].tokens == 64);
    CHECK(t3[i].tokens == 128);
    CHECK(std::equal(quarters[i].begin(), quarters[i].end(), halves[i].begin()));
    CHECK(std::equal(halves[i].begin(), halves[i].end(), fulls[i].begin()));
    CHECK(fulls[i].size() == 256);
  }
  std::vector<Tally> bad(3);
  CHECK_THROWS_AS(continue_from_anchors(lm, quarters, bundles, 128, GuidanceConfig{}, 3, 2, bad),
                  ShapeMismatch);
}

TEST_CASE("rejected slot takes a survivor: [P, I, P, P]") {
  const std::vector<TokenSequence> x = {{1}, {2}, {3}, {4}};
  const std::vector<Verdict> v = {{0, Judgment::possible, {}}, {1, Judgment::impossible, {}},
                                  {2, Judgment::possible, {}}, {3, Judgment::possible, {}}};
  // First seed whose single draw over three survivors lands on the last one.
  std::uint64_t seed = 0;
  while (Rng(seed).below(3) != 2) ++seed;
  Rng rng(seed);
  CHECK(replace_rejected(x, v, rng) == std::vector<TokenSequence>{{1}, {4}, {3}, {4}});

  Rng any(5);
  std::vector<Verdict> all(4);
  CHECK(replace_rejected(x, all, any) == x);
  for (auto& a : all) a.judgment = Judgment::impossible;
  CHECK_THROWS_AS(replace_rejected(x, all, any), AllRejected);
  CHECK_THROWS_AS(replace_rejected(std::span(x).first(3), v, any), ShapeMismatch);
}

TEST_CASE("replacement draws are uniform and independent") {
  const std::vector<Verdict> v = {{0, Judgment::impossible, {}}, {1, Judgment::possible, {}},
                                  {2, Judgment::impossible, {}}, {3, Judgment::possible, {}}};
  std::map<std::pair<int, int>, int> pairs;
  const int n = 40000;
  for (int seed = 0; seed < n; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const auto s = replacement_sources(v, rng);
    REQUIRE(s[1] == 1);
    REQUIRE(s[3] == 3);
    ++pairs[{s[0], s[2]}];
  }
  // Four equally likely (slot 0, slot 2) source pairs, clones included.
  REQUIRE(pairs.size() == 4);
  for (const auto& [_, count] : pairs) CHECK(std::abs(count / double(n) - 0.25) < 0.015);
}

TEST_CASE("GridAR budget matches Best-of-N") {
  const SceneLM lm(kSpec);
  OracleVerifier oracle(kPalette);
  OracleReformulator reformulator(kPalette);
  OracleOrm orm(kPalette);
  const auto prompt = ScenePrompt::parse("7 red squares");

  for (auto mode : {GuidanceMode::two_way, GuidanceMode::replacement, GuidanceMode::three_way}) {
    for (int seed = 0; seed < 10; ++seed) {
      const auto o = run_gridar(plan_with(mode), prompt, lm, oracle, &reformulator, orm,
                                static_cast<std::uint64_t>(seed));
      INFO(to_string(mode) << " seed " << seed);
      CHECK(o.finals.size() == 4);
      CHECK(o.ledger.generated_tokens + o.ledger.retry_tokens ==
            1024 + o.ledger.retry_tokens);
      CHECK(o.ledger.generated_tokens == 1024);
      CHECK(o.ledger.orm_calls == 4);
      // A retry re-verifies the boundary: one grid at stage 1, two at stage 2.
      int retries = 0, retry_grids = 0;
      for (const auto& e : o.audit) {
        if (e.kind != "retry") continue;
        ++retries;
        retry_grids += e.stage == 1 ? 1 : 2;
      }
      CHECK(o.ledger.verifier_calls == 3 + retry_grids);
      // Either boundary regenerates 4 x 64 tokens.
      CHECK(o.ledger.retry_tokens == 256 * retries);
      const auto& f = o.ledger.forward;
      CHECK(f.uncond == 1024);
      if (mode == GuidanceMode::three_way) {
        CHECK(f.original == 1024);
        CHECK(f.reformulated == o.ledger.reformulated_tokens);
        CHECK(f.total() == 2 * 1024 + o.ledger.reformulated_tokens);
      } else {
        CHECK(f.total() == 2 * 1024);
        if (mode == GuidanceMode::two_way) CHECK(o.ledger.reformulated_tokens == 0);
      }
      for (const auto& c : o.finals) CHECK(c.tokens.size() == 256);
    }
  }

  StagePlan two = plan_with(GuidanceMode::replacement);
  two.n_start_canvases = 2;
  const auto o8 = run_gridar(two, prompt, lm, oracle, &reformulator, orm, 4);
  CHECK(o8.finals.size() == 8);
  CHECK(o8.ledger.generated_tokens == 2048);
  CHECK(o8.ledger.orm_calls == 8);

  const auto bo4 = run_best_of_n(4, prompt, lm, GuidanceConfig{}, orm, 4);
  CHECK(bo4.ledger.generated_tokens == 1024);
  CHECK(bo4.ledger.forward.total() == 2048);
  CHECK(bo4.ledger.verifier_calls == 0);
}

TEST_CASE("accepting everything keeps four distinct lineages") {
  const SceneLM lm(kSpec);
  AcceptAllVerifier accept;
  OracleOrm orm(kPalette);
  const auto o = run_gridar(plan_with(GuidanceMode::two_way), ScenePrompt::parse("6 red squares"),
                            lm, accept, nullptr, orm, 12);
  CHECK(o.ledger.replacements == 0);
  CHECK(o.ledger.verifier_calls == 0);
  CHECK(o.ledger.rejections == 0);
  std::set<TokenSequence> distinct;
  for (size_t i = 0; i < o.finals.size(); ++i) {
    distinct.insert(o.finals[i].tokens);
    const auto& chain = o.finals[i].origin;
    REQUIRE(chain.size() == 3);
    for (const auto& link : chain) CHECK(link.slot == static_cast<int>(i));
  }
  CHECK(distinct.size() == 4);
}

TEST_CASE("all-rejected policies") {
  const SceneLM lm(kSpec);
  OracleOrm orm(kPalette);
  OracleReformulator reformulator(kPalette);
  const auto prompt = ScenePrompt::parse("4 red squares");

  SUBCASE("retry succeeds") {
    StubbornVerifier v(1);
    const auto o = run_gridar(plan_with(GuidanceMode::replacement), prompt, lm, v, &reformulator, orm, 3);
    CHECK(o.ledger.retry_tokens == 256);
    CHECK(o.ledger.retry_forward.total() == 512);
    CHECK(o.ledger.generated_tokens == 1024);
    CHECK(o.ledger.forced_accepts == 0);
    CHECK(o.ledger.verifier_calls == 4);
    CHECK(audit_text(o).find("retry") != std::string::npos);
    for (const auto& f : o.finals) {
      CHECK(f.origin.front().attempt == 1);
      CHECK_FALSE(f.forced);
    }
  }
  SUBCASE("retry fails, then everything is accepted") {
    StubbornVerifier v(2);
    const auto o = run_gridar(plan_with(GuidanceMode::replacement), prompt, lm, v, &reformulator, orm, 3);
    CHECK(o.ledger.forced_accepts == 1);
    CHECK(o.ledger.replacements == 0);
    CHECK(o.ledger.retry_tokens == 256);
    for (const auto& f : o.finals) CHECK(f.forced);
    CHECK(audit_text(o).find("forced_accept") != std::string::npos);
  }
  SUBCASE("accept_all skips the retry") {
    StubbornVerifier v(1);
    auto plan = plan_with(GuidanceMode::replacement);
    plan.all_rejected_policy = AllRejectedPolicy::accept_all;
    const auto o = run_gridar(plan, prompt, lm, v, &reformulator, orm, 3);
    CHECK(o.ledger.retry_tokens == 0);
    CHECK(o.ledger.forced_accepts == 1);
  }
  SUBCASE("abort") {
    StubbornVerifier v(1);
    auto plan = plan_with(GuidanceMode::replacement);
    plan.all_rejected_policy = AllRejectedPolicy::abort;
    CHECK_THROWS_AS(run_gridar(plan, prompt, lm, v, &reformulator, orm, 3), Abort);
  }
}

TEST_CASE("verifier failures fall back to accepting the grid") {
  const SceneLM lm(kSpec);
  OracleOrm orm(kPalette);
  const auto prompt = ScenePrompt::parse("4 red squares");
  BrokenVerifier broken;
  const auto o = run_gridar(plan_with(GuidanceMode::replacement), prompt, lm, broken, nullptr, orm, 8);
  CHECK(o.finals.size() == 4);
  CHECK(o.ledger.verifier_calls == 3);
  CHECK(o.ledger.verifier_failures == 3);
  CHECK(o.ledger.rejections == 0);
  CHECK(o.ledger.forced_accepts == 0);
  int warnings = 0;
  for (const auto& e : o.audit) warnings += e.kind == "warning";
  CHECK(warnings == 3);

  ShortVerifier short_v;
  const auto s = run_gridar(plan_with(GuidanceMode::replacement), prompt, lm, short_v, nullptr, orm, 8);
  CHECK(s.ledger.verifier_failures == 3);
  CHECK(s.ledger.rejections == 0);
}

TEST_CASE("serial and threaded runs agree") {
  const SceneLM lm(kSpec);
  OracleVerifier oracle(kPalette);
  OracleReformulator reformulator(kPalette);
  OracleOrm orm(kPalette);
  for (auto mode : {GuidanceMode::replacement, GuidanceMode::three_way}) {
    StagePlan plan = plan_with(mode);
    plan.n_start_canvases = 2;
    for (int seed = 0; seed < 6; ++seed) {
      const auto prompt = ScenePrompt::parse(std::to_string(3 + seed) + " green triangles");
      const auto a = run_gridar(plan, prompt, lm, oracle, &reformulator, orm,
                                static_cast<std::uint64_t>(seed), 1);
      const auto b = run_gridar(plan, prompt, lm, oracle, &reformulator, orm,
                                static_cast<std::uint64_t>(seed), 4);
      REQUIRE(a.finals.size() == b.finals.size());
      for (size_t i = 0; i < a.finals.size(); ++i) {
        CHECK(a.finals[i].tokens == b.finals[i].tokens);
        CHECK(a.finals[i].origin == b.finals[i].origin);
      }
      CHECK(a.best == b.best);
      CHECK(a.ledger.to_json() == b.ledger.to_json());
      CHECK(audit_text(a) == audit_text(b));
    }
  }
  const auto p = ScenePrompt::parse("6 red squares");
  const auto x = run_best_of_n(8, p, lm, GuidanceConfig{}, orm, 2, 1);
  const auto y = run_best_of_n(8, p, lm, GuidanceConfig{}, orm, 2, 3);
  for (size_t i = 0; i < 8; ++i) CHECK(x.finals[i].tokens == y.finals[i].tokens);
}

TEST_CASE("provenance chains replay to the same image") {
  const SceneLM lm(kSpec);
  OracleVerifier oracle(kPalette);
  OracleReformulator reformulator(kPalette);
  OracleOrm orm(kPalette);
  int replaced = 0;
  for (auto mode : {GuidanceMode::replacement, GuidanceMode::three_way, GuidanceMode::two_way}) {
    for (int seed = 0; seed < 15; ++seed) {
      const auto prompt = ScenePrompt::parse("8 red squares");
      const auto o = run_gridar(plan_with(mode), prompt, lm, oracle, &reformulator, orm,
                                static_cast<std::uint64_t>(seed));
      replaced += static_cast<int>(o.ledger.replacements);
      const PromptBundle base(prompt);
      for (const auto& f : o.finals) {
        REQUIRE(f.origin.size() == 3);
        CHECK(f.origin[1].anchor_from == f.origin[0].slot);
        CHECK(f.origin[2].anchor_from == f.origin[1].slot);
        const PromptBundle later = f.reformulated ? base.with_reformulation(*f.reformulated) : base;
        Tally t;
        Rng r1 = slot_rng(static_cast<std::uint64_t>(seed), f.origin[0]);
        const auto q = sample_continuation(lm, base, plan_with(mode).guidance, {}, 64, r1, t);
        Rng r2 = slot_rng(static_cast<std::uint64_t>(seed), f.origin[1]);
        const auto h = sample_continuation(lm, later, plan_with(mode).guidance, q, 128, r2, t);
        Rng r3 = slot_rng(static_cast<std::uint64_t>(seed), f.origin[2]);
        const auto full = sample_continuation(lm, later, plan_with(mode).guidance, h, 256, r3, t);
        REQUIRE(full == f.tokens);
      }
    }
  }
  CHECK(replaced > 0);
}

TEST_CASE("finals never pass through a rejected prefix") {
  const SceneLM lm(kSpec);
  OracleVerifier oracle(kPalette);
  OracleReformulator reformulator(kPalette);
  OracleOrm orm(kPalette);
  int checked = 0;
  for (int seed = 0; seed < 100; ++seed) {
    const auto prompt = ScenePrompt::parse(std::to_string(2 + seed % 8) + " blue squares");
    const auto o = run_gridar(plan_with(GuidanceMode::replacement), prompt, lm, oracle,
                              &reformulator, orm, static_cast<std::uint64_t>(seed));
    CHECK(o.ledger.forced_accepts == 0);
    for (const auto& f : o.finals) {
      for (int rows : {4, 8}) {
        const TokenCanvas view(kSpec, std::span(f.tokens).first(static_cast<size_t>(rows * 16)));
        REQUIRE(judge_partial(view, rows, prompt, kPalette).possible());
        ++checked;
      }
    }
  }
  CHECK(checked == 800);
}

TEST_CASE("two-way decoding never needs the three-way combinator") {
  const SceneLM lm(kSpec);
  const auto prompt = ScenePrompt::parse("6 yellow circles");
  const auto reformulated = ScenePrompt::parse(
      "6 yellow circles; top (rows 0-3): 2 yellow circles; bottom (rows 4-15): 4 yellow circles");
  const PromptBundle plain(prompt);
  const PromptBundle with_r = plain.with_reformulation(reformulated);
  for (int seed = 0; seed < 20; ++seed) {
    Rng ref_rng(static_cast<std::uint64_t>(seed));
    const auto want = reference_two_way(lm, prompt, 5.0, {}, 256, ref_rng);

    GuidanceConfig two;
    two.mode = GuidanceMode::two_way;
    Tally t;
    Rng a(static_cast<std::uint64_t>(seed));
    CHECK(sample_continuation(lm, with_r, two, {}, 256, a, t) == want);
    CHECK(t.forward.reformulated == 0);
    CHECK(t.reformulated_tokens == 0);

    GuidanceConfig three;
    Rng b(static_cast<std::uint64_t>(seed));
    CHECK(sample_continuation(lm, plain, three, {}, 256, b, t) == want);
  }
}

TEST_CASE("Best-of-N basics") {
  const SceneLM lm(kSpec);
  OracleOrm orm(kPalette);
  const auto prompt = ScenePrompt::parse("3 red circles");
  const auto one = run_best_of_n(1, prompt, lm, GuidanceConfig{}, orm, 5);
  CHECK(one.finals.size() == 1);
  CHECK(one.best == 0);
  CHECK(one.ledger.generated_tokens == 256);
  const auto again = run_best_of_n(1, prompt, lm, GuidanceConfig{}, orm, 5);
  CHECK(again.finals[0].tokens == one.finals[0].tokens);
  CHECK_THROWS_AS(run_best_of_n(0, prompt, lm, GuidanceConfig{}, orm, 5), InvalidPlan);

  const auto four = run_best_of_n(4, prompt, lm, GuidanceConfig{}, orm, 5);
  for (const auto& s : four.scores) CHECK(s.score <= four.best_score());
  for (const auto& s : four.scores) {
    if (s.score == four.best_score()) {
      CHECK(s.candidate_index >= four.best);
    }
  }
}

TEST_CASE("ledger JSON leaves out wall-clock unless asked") {
  BudgetLedger l;
  l.generated_tokens = 10;
  l.wall_clock = 1.5;
  CHECK_FALSE(l.to_json().contains("wall_clock"));
  CHECK(l.to_json(true)["wall_clock"] == 1.5);
  BudgetLedger sum;
  sum += l;
  sum += l;
  CHECK(sum.generated_tokens == 20);
  CHECK(sum.wall_clock == 3.0);
}
