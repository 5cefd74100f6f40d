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

#include "gridar/pipeline.hpp"

#include <chrono>
#include <map>
#include <optional>

#include "gridar/errors.hpp"
#include "gridar/parallel.hpp"

namespace gridar {
namespace {

constexpr std::uint64_t kReplaceKey = 0x5245504cULL;  // "REPL"

void add_tally(BudgetLedger& ledger, const Tally& t, bool retry) {
  if (retry) {
    ledger.retry_tokens += t.tokens;
    ledger.retry_forward += t.forward;
  } else {
    ledger.generated_tokens += t.tokens;
    ledger.forward += t.forward;
    ledger.reformulated_tokens += t.reformulated_tokens;
  }
  ledger.prefill_tokens += t.prefill;
}

std::string origin_text(const Origin& o) {
  return "canvas " + std::to_string(o.canvas) + " stage " + std::to_string(o.stage) +
         " slot " + std::to_string(o.slot) + " attempt " + std::to_string(o.attempt);
}

}  // namespace

std::string to_string(AllRejectedPolicy policy) {
  switch (policy) {
    case AllRejectedPolicy::retry_once_then_accept_all:
      return "retry_once_then_accept_all";
    case AllRejectedPolicy::accept_all:
      return "accept_all";
    case AllRejectedPolicy::abort:
      return "abort";
  }
  return "unknown";
}

AllRejectedPolicy parse_all_rejected_policy(const std::string& name) {
  if (name == "retry_once_then_accept_all") return AllRejectedPolicy::retry_once_then_accept_all;
  if (name == "accept_all") return AllRejectedPolicy::accept_all;
  if (name == "abort") return AllRejectedPolicy::abort;
  throw ConfigError("unknown all-rejected policy '" + name + "'");
}

void StagePlan::validate(const CanvasSpec& spec) const {
  if (R1 < 1 || R2 < 1) throw InvalidPlan("band counts must be positive");
  if (R1 % R2 != 0) throw InvalidPlan("R1 must be a multiple of R2");
  if (spec.h % R1 != 0) {
    throw InvalidPlan("h=" + std::to_string(spec.h) + " is not divisible by R1=" +
                      std::to_string(R1));
  }
  if (n_start_canvases < 1) throw InvalidPlan("need at least one start canvas");
  for (int s : reformulate_at) {
    if (s != 1 && s != 2) throw InvalidPlan("reformulation stages must be 1 or 2");
  }
  if (!(guidance.s_o >= 0.0 && guidance.s_r >= 0.0)) {
    throw InvalidPlan("guidance scales must be non-negative");
  }
}

ForwardPasses& ForwardPasses::operator+=(const ForwardPasses& o) {
  uncond += o.uncond;
  original += o.original;
  reformulated += o.reformulated;
  return *this;
}

BudgetLedger& BudgetLedger::operator+=(const BudgetLedger& o) {
  generated_tokens += o.generated_tokens;
  forward += o.forward;
  reformulated_tokens += o.reformulated_tokens;
  retry_tokens += o.retry_tokens;
  retry_forward += o.retry_forward;
  prefill_tokens += o.prefill_tokens;
  verifier_calls += o.verifier_calls;
  verifier_failures += o.verifier_failures;
  orm_calls += o.orm_calls;
  rejections += o.rejections;
  replacements += o.replacements;
  forced_accepts += o.forced_accepts;
  wall_clock += o.wall_clock;
  return *this;
}

nlohmann::ordered_json BudgetLedger::to_json(bool with_wall_clock) const {
  auto passes = [](const ForwardPasses& f) {
    return nlohmann::ordered_json{{"uncond", f.uncond},
                                  {"original", f.original},
                                  {"reformulated", f.reformulated},
                                  {"total", f.total()}};
  };
  nlohmann::ordered_json j{{"generated_tokens", generated_tokens},
                           {"forward_passes", passes(forward)},
                           {"reformulated_tokens", reformulated_tokens},
                           {"retry_tokens", retry_tokens},
                           {"retry_forward_passes", passes(retry_forward)},
                           {"prefill_tokens", prefill_tokens},
                           {"verifier_calls", verifier_calls},
                           {"verifier_failures", verifier_failures},
                           {"orm_calls", orm_calls},
                           {"rejections", rejections},
                           {"replacements", replacements},
                           {"forced_accepts", forced_accepts}};
  if (with_wall_clock) j["wall_clock"] = wall_clock;
  return j;
}

double Outcome::best_score() const {
  for (const auto& s : scores) {
    if (s.candidate_index == best) return s.score;
  }
  throw OutOfRange("outcome has no score for its best candidate");
}

Rng slot_rng(std::uint64_t seed, const Origin& origin) {
  return Rng::derive(seed, {static_cast<std::uint64_t>(origin.canvas),
                            static_cast<std::uint64_t>(origin.stage),
                            static_cast<std::uint64_t>(origin.slot),
                            static_cast<std::uint64_t>(origin.attempt)});
}

TokenSequence sample_continuation(const ArModel& model, const PromptBundle& bundle,
                                  const GuidanceConfig& guidance,
                                  std::span<const TokenId> prefix, int target_length, Rng& rng,
                                  Tally& tally) {
  const int start = static_cast<int>(prefix.size());
  if (start > target_length || target_length > model.spec().token_count()) {
    throw OutOfRange("cannot extend " + std::to_string(start) + " tokens to " +
                     std::to_string(target_length));
  }
  const bool use_r = bundle.reformulated && guidance.mode != GuidanceMode::two_way;
  const bool use_o = !(use_r && guidance.mode == GuidanceMode::replacement);

  ModelSession su = model.open(bundle.unconditional());
  std::optional<ModelSession> so, sr;
  if (use_o) so.emplace(model.open(bundle.original_condition()));
  if (use_r) sr.emplace(model.open(bundle.reformulated_condition()));
  su.extend(prefix);
  if (so) so->extend(prefix);
  if (sr) sr->extend(prefix);
  tally.prefill += static_cast<std::int64_t>(start) * (1 + use_o + use_r);

  const auto floor = guidance.floor;
  TokenSequence out(prefix.begin(), prefix.end());
  out.reserve(static_cast<size_t>(target_length));
  for (int pos = start; pos < target_length; ++pos) {
    const Logits l_u = model.next_logits(su, pos);
    ++tally.forward.uncond;
    Logits l_o, l_r;
    if (so) {
      l_o = model.next_logits(*so, pos);
      ++tally.forward.original;
    }
    if (sr) {
      l_r = model.next_logits(*sr, pos);
      ++tally.forward.reformulated;
    }

    Logits guided;
    switch (guidance.mode) {
      case GuidanceMode::two_way:
        guided = cfg_combine(l_o, l_u, guidance.s_o, floor);
        break;
      case GuidanceMode::three_way:
        guided = sr ? three_way_combine(l_u, l_o, l_r, guidance)
                    : cfg_combine(l_o, l_u, guidance.s_o, floor);
        break;
      case GuidanceMode::replacement:
        guided = sr ? replacement_combine(l_u, l_r, guidance.s_r, floor)
                    : cfg_combine(l_o, l_u, guidance.s_r, floor);
        break;
    }

    const TokenId token = sample_token(guided, model.temperature(), rng);
    su.append(token);
    if (so) so->append(token);
    if (sr) sr->append(token);
    out.push_back(token);
    ++tally.tokens;
    if (sr) ++tally.reformulated_tokens;
  }
  return out;
}

std::vector<TokenSequence> generate_band_candidates(const ArModel& model,
                                                    const PromptBundle& bundle, int R1,
                                                    const GuidanceConfig& guidance,
                                                    std::uint64_t seed, Tally& tally,
                                                    int canvas, int attempt, int threads) {
  const auto bands = partition_rows(model.spec(), R1);
  const int L = bands.front().token_count;
  std::vector<TokenSequence> out(static_cast<size_t>(R1));
  std::vector<Tally> tallies(static_cast<size_t>(R1));
  parallel_for(R1, threads, [&](int i) {
    Rng rng = slot_rng(seed, {canvas, 1, i, attempt, -1});
    out[static_cast<size_t>(i)] =
        sample_continuation(model, bundle, guidance, {}, L, rng, tallies[static_cast<size_t>(i)]);
  });
  for (const auto& t : tallies) {
    tally.tokens += t.tokens;
    tally.reformulated_tokens += t.reformulated_tokens;
    tally.prefill += t.prefill;
    tally.forward += t.forward;
  }
  return out;
}

std::vector<int> replacement_sources(std::span<const Verdict> verdicts, Rng& rng) {
  std::vector<int> accepted;
  for (size_t i = 0; i < verdicts.size(); ++i) {
    if (verdicts[i].possible()) accepted.push_back(static_cast<int>(i));
  }
  if (accepted.empty()) {
    throw AllRejected("all " + std::to_string(verdicts.size()) + " candidates rejected");
  }
  std::vector<int> sources(verdicts.size());
  for (size_t i = 0; i < verdicts.size(); ++i) {
    sources[i] = verdicts[i].possible()
                     ? static_cast<int>(i)
                     : accepted[static_cast<size_t>(rng.below(accepted.size()))];
  }
  return sources;
}

std::vector<TokenSequence> replace_rejected(std::span<const TokenSequence> candidates,
                                            std::span<const Verdict> verdicts, Rng& rng) {
  if (candidates.size() != verdicts.size()) {
    throw ShapeMismatch("one verdict per candidate is required");
  }
  const auto sources = replacement_sources(verdicts, rng);
  std::vector<TokenSequence> anchors;
  anchors.reserve(sources.size());
  for (int s : sources) anchors.push_back(candidates[static_cast<size_t>(s)]);
  return anchors;
}

std::vector<TokenSequence> continue_from_anchors(const ArModel& model,
                                                 std::span<const TokenSequence> anchors,
                                                 std::span<const PromptBundle> bundles,
                                                 int target_length,
                                                 const GuidanceConfig& guidance,
                                                 std::uint64_t seed, int stage,
                                                 std::span<Tally> tallies, int canvas,
                                                 int attempt, int threads) {
  const int n = static_cast<int>(anchors.size());
  if (bundles.size() != anchors.size() || tallies.size() != anchors.size()) {
    throw ShapeMismatch("anchors, bundles and tallies must align");
  }
  std::vector<TokenSequence> out(anchors.size());
  parallel_for(n, threads, [&](int i) {
    const auto k = static_cast<size_t>(i);
    Rng rng = slot_rng(seed, {canvas, stage, i, attempt, i});
    out[k] = sample_continuation(model, bundles[k], guidance, anchors[k], target_length, rng,
                                 tallies[k]);
  });
  return out;
}

namespace {

// One GridAR start canvas. Stages and boundaries are barriers; everything
// appended to the audit log happens on the calling thread in slot order.
class CanvasRun {
 public:
  CanvasRun(const StagePlan& plan, const PromptBundle& base, const ArModel& model,
            Verifier& verifier, Reformulator* reformulator, std::uint64_t seed, int canvas,
            int threads, Outcome& out)
      : plan_(plan),
        base_(base),
        model_(model),
        verifier_(verifier),
        reformulator_(reformulator),
        seed_(seed),
        canvas_(canvas),
        threads_(threads),
        out_(out) {}

  std::vector<CandidateState> run() {
    const auto& spec = model_.spec();
    const int L2 = (spec.h / plan_.R2) * spec.w;

    auto stage1 = [&](int attempt) {
      Tally tally;
      auto seqs = generate_band_candidates(model_, base_, plan_.R1, plan_.guidance, seed_,
                                           tally, canvas_, attempt, threads_);
      add_tally(out_.ledger, tally, attempt > 0);
      std::vector<CandidateState> cands(seqs.size());
      for (size_t i = 0; i < seqs.size(); ++i) {
        cands[i].tokens = std::move(seqs[i]);
        cands[i].origin = {{canvas_, 1, static_cast<int>(i), attempt, -1}};
      }
      return cands;
    };
    auto anchors1 = boundary(1, stage1(0), plan_.R1, stage1);

    auto stage2 = [&](int attempt) { return extend(anchors1, 2, L2, attempt); };
    auto anchors2 = boundary(2, stage2(0), plan_.R2, stage2);

    return extend(anchors2, 3, spec.token_count(), 0);
  }

 private:
  void audit(int stage, int slot, std::string kind, std::string detail) {
    out_.audit.push_back({canvas_, stage, slot, std::move(kind), std::move(detail)});
  }

  // Extends anchors (one per slot) to `length` tokens at `stage`.
  std::vector<CandidateState> extend(const std::vector<CandidateState>& anchors, int stage,
                                     int length, int attempt) {
    std::vector<TokenSequence> prefixes;
    std::vector<PromptBundle> bundles;
    for (const auto& a : anchors) {
      prefixes.push_back(a.tokens);
      bundles.push_back(a.reformulated ? base_.with_reformulation(*a.reformulated) : base_);
    }
    std::vector<Tally> tallies(anchors.size());
    auto seqs = continue_from_anchors(model_, prefixes, bundles, length, plan_.guidance, seed_,
                                      stage, tallies, canvas_, attempt, threads_);
    for (const auto& t : tallies) add_tally(out_.ledger, t, attempt > 0);

    std::vector<CandidateState> out(anchors.size());
    for (size_t i = 0; i < anchors.size(); ++i) {
      out[i].tokens = std::move(seqs[i]);
      out[i].origin = anchors[i].origin;
      out[i].origin.push_back(
          {canvas_, stage, static_cast<int>(i), attempt, anchors[i].origin.back().slot});
      out[i].reformulated = anchors[i].reformulated;
      out[i].forced = anchors[i].forced;
    }
    return out;
  }

  // Verifies `cands` in grids of `cells` candidates each. Fills `verdicts` and,
  // when the verifier offers them, per-candidate reformulations.
  void inspect(int stage, const std::vector<CandidateState>& cands, int cells, bool want_ref,
               std::vector<Verdict>& verdicts,
               std::vector<std::optional<ScenePrompt>>& reformulations) {
    const auto& spec = model_.spec();
    verdicts.assign(cands.size(), Verdict{});
    reformulations.assign(cands.size(), std::nullopt);
    for (size_t i = 0; i < cands.size(); ++i) verdicts[i].candidate_index = static_cast<int>(i);
    if (!verifier_.prunes()) return;

    for (size_t g = 0; g * cells < cands.size(); ++g) {
      const size_t first = g * static_cast<size_t>(cells);
      std::vector<TokenSequence> segments;
      for (int c = 0; c < cells; ++c) segments.push_back(cands[first + c].tokens);
      GridView grid{compose_grid(segments, spec), cells, stage};
      ++out_.ledger.verifier_calls;
      try {
        Inspection insp = verifier_.inspect(grid, *base_.original, want_ref);
        if (static_cast<int>(insp.verdicts.size()) != cells) {
          throw MalformedResponse("verifier returned " + std::to_string(insp.verdicts.size()) +
                                  " verdicts for " + std::to_string(cells) + " cells");
        }
        for (int c = 0; c < cells; ++c) {
          auto& v = verdicts[first + c];
          v.judgment = insp.verdicts[static_cast<size_t>(c)].judgment;
          v.reason = insp.verdicts[static_cast<size_t>(c)].reason;
          if (static_cast<size_t>(c) < insp.reformulations.size()) {
            reformulations[first + c] = insp.reformulations[static_cast<size_t>(c)];
          }
        }
      } catch (const VerifierError& e) {
        ++out_.ledger.verifier_failures;
        audit(stage, static_cast<int>(first), "warning",
              std::string("verifier failed, accepting grid: ") + e.what());
      }
    }
  }

  template <typename Regenerate>
  std::vector<CandidateState> boundary(int stage, std::vector<CandidateState> cands, int cells,
                                       Regenerate&& regenerate) {
    const bool reformulate =
        plan_.reformulate_at.contains(stage) && plan_.guidance.mode != GuidanceMode::two_way;
    const bool want_ref = reformulate && reformulator_ == nullptr;

    int attempt = 0;
    bool forced = false;
    std::vector<Verdict> verdicts;
    std::vector<std::optional<ScenePrompt>> reformulations;
    std::vector<int> sources;
    for (;;) {
      inspect(stage, cands, cells, want_ref, verdicts, reformulations);
      for (const auto& v : verdicts) {
        audit(stage, v.candidate_index, "verdict",
              to_string(v.judgment) + (v.reason.empty() ? "" : ": " + v.reason));
        if (!v.possible()) ++out_.ledger.rejections;
      }
      Rng rng = Rng::derive(seed_, {static_cast<std::uint64_t>(canvas_),
                                    static_cast<std::uint64_t>(stage), kReplaceKey,
                                    static_cast<std::uint64_t>(attempt)});
      try {
        sources = replacement_sources(verdicts, rng);
        break;
      } catch (const AllRejected& e) {
        const auto policy = plan_.all_rejected_policy;
        if (policy == AllRejectedPolicy::abort) {
          throw Abort("stage " + std::to_string(stage) + ": " + e.what());
        }
        if (policy == AllRejectedPolicy::retry_once_then_accept_all && attempt == 0) {
          audit(stage, -1, "retry", "all candidates rejected; regenerating stage");
          attempt = 1;
          cands = regenerate(attempt);
          continue;
        }
        audit(stage, -1, "forced_accept", "all candidates rejected; accepting all");
        ++out_.ledger.forced_accepts;
        forced = true;
        sources.resize(cands.size());
        for (size_t i = 0; i < sources.size(); ++i) sources[i] = static_cast<int>(i);
        break;
      }
    }

    std::vector<CandidateState> anchors(cands.size());
    std::map<int, std::shared_ptr<const ScenePrompt>> reformulated;
    for (size_t i = 0; i < cands.size(); ++i) {
      const int src = sources[i];
      auto& a = anchors[i];
      a = cands[static_cast<size_t>(src)];
      a.status = CandidateStatus::anchor;
      a.forced = a.forced || forced;
      if (src != static_cast<int>(i)) {
        ++out_.ledger.replacements;
        cands[i].status = CandidateStatus::rejected;
        audit(stage, static_cast<int>(i), "replacement", "slot " + std::to_string(i) +
                                                             " <- slot " + std::to_string(src));
      }
      if (!reformulate) continue;
      if (!reformulated.contains(src)) {
        reformulated[src] = reformulation_for(stage, cands[static_cast<size_t>(src)],
                                              reformulations[static_cast<size_t>(src)]);
      }
      if (reformulated[src]) a.reformulated = reformulated[src];
    }
    return anchors;
  }

  std::shared_ptr<const ScenePrompt> reformulation_for(
      int stage, const CandidateState& cand, const std::optional<ScenePrompt>& offered) {
    const int slot = cand.origin.back().slot;
    try {
      std::optional<ScenePrompt> r;
      if (reformulator_) {
        r = reformulator_->reformulate(*base_.original, TokenCanvas(model_.spec(), cand.tokens));
      } else {
        r = offered;
      }
      if (!r) return nullptr;
      audit(stage, slot, "reformulation", r->text());
      return std::make_shared<const ScenePrompt>(std::move(*r));
    } catch (const InfeasibleRemainder& e) {
      audit(stage, slot, "warning", std::string("no reformulation: ") + e.what());
      return nullptr;
    }
  }

  const StagePlan& plan_;
  const PromptBundle& base_;
  const ArModel& model_;
  Verifier& verifier_;
  Reformulator* reformulator_;
  std::uint64_t seed_;
  int canvas_;
  int threads_;
  Outcome& out_;
};

}  // namespace

Outcome run_gridar(const StagePlan& plan, const ScenePrompt& prompt, const ArModel& model,
                   Verifier& verifier, Reformulator* reformulator, OutcomeReward& orm,
                   std::uint64_t seed, int threads) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& spec = model.spec();
  plan.validate(spec);
  const PromptBundle base(prompt);

  Outcome out;
  out.audit.push_back({0, 0, -1, "seed", std::to_string(seed)});
  for (int c = 0; c < plan.n_start_canvases; ++c) {
    CanvasRun run(plan, base, model, verifier, reformulator, seed, c, threads, out);
    for (auto& f : run.run()) out.finals.push_back(std::move(f));
  }

  for (size_t i = 0; i < out.finals.size(); ++i) {
    const TokenCanvas image(spec, out.finals[i].tokens);
    out.scores.push_back({static_cast<int>(i), orm.score(image, prompt)});
    ++out.ledger.orm_calls;
  }
  out.best = select_best(out.scores);
  out.audit.push_back({0, 3, out.best, "select",
                       "best " + origin_text(out.finals[static_cast<size_t>(out.best)].origin.back()) +
                           " score " + std::to_string(out.best_score())});
  out.ledger.wall_clock =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

Outcome run_best_of_n(int N, const ScenePrompt& prompt, const ArModel& model,
                      const GuidanceConfig& guidance, OutcomeReward& orm, std::uint64_t seed,
                      int threads) {
  if (N < 1) throw InvalidPlan("Best-of-N needs N >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  const auto& spec = model.spec();
  const PromptBundle base(prompt);

  Outcome out;
  out.audit.push_back({0, 0, -1, "seed", std::to_string(seed)});
  std::vector<TokenSequence> seqs(static_cast<size_t>(N));
  std::vector<Tally> tallies(static_cast<size_t>(N));
  parallel_for(N, threads, [&](int i) {
    Rng rng = slot_rng(seed, {i, 0, 0, 0, -1});
    seqs[static_cast<size_t>(i)] = sample_continuation(
        model, base, guidance, {}, spec.token_count(), rng, tallies[static_cast<size_t>(i)]);
  });
  for (int i = 0; i < N; ++i) {
    add_tally(out.ledger, tallies[static_cast<size_t>(i)], false);
    CandidateState c;
    c.tokens = std::move(seqs[static_cast<size_t>(i)]);
    c.origin = {{i, 0, 0, 0, -1}};
    out.finals.push_back(std::move(c));
    const TokenCanvas image(spec, out.finals.back().tokens);
    out.scores.push_back({i, orm.score(image, prompt)});
    ++out.ledger.orm_calls;
  }
  out.best = select_best(out.scores);
  out.audit.push_back({out.best, 0, 0, "select", "score " + std::to_string(out.best_score())});
  out.ledger.wall_clock =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace gridar
