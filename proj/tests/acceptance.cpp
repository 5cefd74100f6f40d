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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Lines prefixed "info" are reported but never gate the result.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "gridar/bench.hpp"
#include "gridar/pipeline.hpp"
#include "gridar/scene_lm.hpp"

using namespace gridar;

namespace {

int failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  %d. %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

void info(const std::string& text) {
  std::printf("info     %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Eigen::VectorXd random_vec(std::mt19937_64& gen, int n, double scale) {
  std::normal_distribution<double> d(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = d(gen);
  return v;
}

// --- 1 ----------------------------------------------------------------------

void cfg_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(1);
  double worst = 0.0;
  for (double s : {0.0, 1.0, 5.0, 7.5}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const auto l_c = random_vec(gen, 13, 1.5), l_u = random_vec(gen, 13, 1.5);
      const Eigen::VectorXd p = softmax(cfg_combine(l_c, l_u, s));
      // normalize(p_c^(1+s) p_u^(-s)) from separately normalised distributions.
      auto norm = [](const Eigen::VectorXd& l) {
        std::vector<long double> q(13);
        long double z = 0, m = l.maxCoeff();
        for (int i = 0; i < 13; ++i) z += q[static_cast<size_t>(i)] = std::exp(l(i) - m);
        for (auto& x : q) x /= z;
        return q;
      };
      const auto pc = norm(l_c), pu = norm(l_u);
      std::vector<long double> want(13);
      long double z = 0;
      for (size_t i = 0; i < 13; ++i) z += want[i] = std::pow(pc[i], 1 + s) * std::pow(pu[i], -s);
      for (int i = 0; i < 13; ++i) {
        worst = std::max(worst, static_cast<double>(std::abs(p(i) - want[static_cast<size_t>(i)] / z)));
      }
    }
  }
  const double t = seconds_since(t0);
  report(1, "CFG identity", worst <= 1e-9 && t < 1.0,
         fmt("max |softmax(cfg) - p_c^(1+s) p_u^(-s)| = %.2e (<= 1e-9) over 4000 pairs, %.3f s", worst, t));
}

// --- 2 ----------------------------------------------------------------------

void orthogonalization() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(2);
  double worst = 0.0;
  for (int dim : {13, 4096}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const auto d_r = random_vec(gen, dim, 3.0), d_o = random_vec(gen, dim, 3.0);
      worst = std::max(worst, std::abs(orthogonal_reject(d_r, d_o).dot(d_o)) / (d_r.norm() * d_o.norm()));
    }
  }
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto u = random_vec(gen, 13, 3.0), o = random_vec(gen, 13, 3.0), r = random_vec(gen, 13, 3.0);
    GuidanceConfig cfg;
    cfg.s_r = 0.0;
    const Eigen::VectorXd two = cfg_combine(o, u, cfg.s_o);
    const Eigen::VectorXd a = three_way_combine(u, o, r, cfg);
    cfg.s_r = 5.0;
    const Eigen::VectorXd b = three_way_combine(u, o, o, cfg);
    mismatches += std::memcmp(a.data(), two.data(), 13 * sizeof(double)) != 0;
    mismatches += std::memcmp(b.data(), two.data(), 13 * sizeof(double)) != 0;
  }
  const double t = seconds_since(t0);
  report(2, "orthogonalization", worst <= 1e-8 && mismatches == 0 && t < 1.0,
         fmt("max |<d_r_perp, d_o>| / (|d_r||d_o|) = %.2e (<= 1e-8) at dims 13 and 4096; "
             "%d of 2000 reductions differ bitwise from two-way CFG, %.3f s",
             worst, mismatches, t));
}

// --- 3 ----------------------------------------------------------------------

void budget_identity() {
  const CanvasSpec spec{16, 16, 13, 8};
  const SceneLM lm(spec);
  const Palette palette;
  OracleVerifier oracle(palette);
  OracleReformulator reformulator(palette);
  OracleOrm orm(palette);
  SuiteSpec suite;
  suite.n_prompts = 10;
  const auto prompts = gen_suite(suite, spec, palette);

  int runs = 0, bad = 0;
  std::int64_t reformulated = 0;
  for (auto mode : {GuidanceMode::two_way, GuidanceMode::replacement, GuidanceMode::three_way}) {
    for (int canvases : {1, 2}) {
      StagePlan plan;
      plan.guidance.mode = mode;
      plan.n_start_canvases = canvases;
      for (const auto& p : prompts) {
        const auto o = run_gridar(plan, p.prompt, lm, oracle, &reformulator, orm, p.seed);
        const auto& l = o.ledger;
        const std::int64_t want = 1024 * canvases;
        const std::int64_t passes = mode == GuidanceMode::three_way
                                        ? 2 * l.generated_tokens + l.reformulated_tokens
                                        : 2 * l.generated_tokens;
        bad += l.generated_tokens != want || l.forward.total() != passes ||
               o.finals.size() != static_cast<size_t>(4 * canvases);
        // Retried stages are itemized separately and follow the same rule.
        bad += mode != GuidanceMode::three_way && l.retry_forward.total() != 2 * l.retry_tokens;
        if (mode == GuidanceMode::three_way) reformulated += l.reformulated_tokens;
        ++runs;
      }
    }
  }
  for (const auto& p : prompts) {
    const auto o = run_best_of_n(4, p.prompt, lm, GuidanceConfig{}, orm, p.seed);
    bad += o.ledger.generated_tokens != 1024 || o.ledger.forward.total() != 2048;
    ++runs;
  }
  report(3, "budget identity", bad == 0 && reformulated > 0,
         fmt("%d runs: GridAR(N=4) 1024 tokens, two start canvases 2048, Best-of-4 1024; "
             "forward passes 2x (two-way/replacement) and 3x for the %lld post-reformulation "
             "three-way tokens; %d mismatches",
             runs, static_cast<long long>(reformulated), bad));
}

// --- 4 ----------------------------------------------------------------------

void sequence_distribution() {
  const auto t0 = std::chrono::steady_clock::now();
  const CanvasSpec spec{2, 2, 3, 8};
  SceneLMParams params;
  params.palette = Palette{1, 2};
  const SceneLM lm(spec, params);
  OracleOrm orm(params.palette);

  struct Case {
    std::string prompt;
    double s;
  };
  double worst = 0.0;
  std::string details;
  // Larger scales collapse this model onto one sequence, which would test little.
  for (const Case& c : {Case{"1 red square", 0.0}, Case{"1 red square", 1.0},
                        Case{"2 red circles", 1.0}}) {
    const auto prompt = ScenePrompt::parse(c.prompt);
    const PromptBundle b(prompt);
    // Exact law: product over positions of normalised exp((1+s) l_o - s l_u).
    std::map<TokenSequence, long double> exact;
    for (int code = 0; code < 81; ++code) {
      TokenSequence x(4);
      for (int i = 0, v = code; i < 4; ++i, v /= 3) x[static_cast<size_t>(i)] = v % 3;
      auto su = lm.open(b.unconditional()), so = lm.open(b.original_condition());
      long double p = 1;
      for (int pos = 0; pos < 4; ++pos) {
        const Logits lo = lm.next_logits(so, pos), lu = lm.next_logits(su, pos);
        long double z = 0, num = 0;
        for (int k = 0; k < 3; ++k) {
          const long double w = std::isinf(lo(k)) ? 0.0L : std::exp((1 + c.s) * lo(k) - c.s * lu(k));
          z += w;
          if (k == x[static_cast<size_t>(pos)]) num = w;
        }
        p *= num / z;
        su.append(x[static_cast<size_t>(pos)]);
        so.append(x[static_cast<size_t>(pos)]);
      }
      exact[x] = p;
    }
    GuidanceConfig g;
    g.mode = GuidanceMode::two_way;
    g.s_o = c.s;
    const int n = 1000000;
    std::map<TokenSequence, int> seen;
    for (int i = 0; i < n; ++i) {
      const auto o = run_best_of_n(1, prompt, lm, g, orm, static_cast<std::uint64_t>(i));
      ++seen[o.finals[0].tokens];
    }
    long double tv = 0;
    int support = 0;
    for (const auto& [x, p] : exact) {
      const auto it = seen.find(x);
      tv += std::abs(p - (it == seen.end() ? 0 : it->second) / static_cast<long double>(n));
      support += p > 1e-4L;
    }
    tv /= 2;
    worst = std::max(worst, static_cast<double>(tv));
    details += fmt("%s\"%s\" s=%.0f: TV %.4f over %d sequences with p > 1e-4",
                   details.empty() ? "" : "; ", c.prompt.c_str(), c.s, static_cast<double>(tv), support);
  }
  const double t = seconds_since(t0);
  report(4, "sequence distribution", worst <= 0.01 && t < 60.0,
         fmt("K=3, 2x2, all 81 sequences, 10^6 pipeline samples each: %s (<= 0.01), %.1f s",
             details.c_str(), t));
}

// --- 5 ----------------------------------------------------------------------

void pilot() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c;  // 200 failing prompts, n in [6, 9], 16x16
  const auto curve = run_pilot(c);
  bool dominates = true;
  std::string row;
  double gap8 = -1.0;
  for (size_t i = 0; i < curve.k.size(); ++i) {
    dominates = dominates && curve.reformulated[i] >= curve.baseline[i];
    if (curve.k[i] == 8) gap8 = curve.reformulated[i] - curve.baseline[i];
    row += fmt("%sk=%d %.3f/%.3f", i ? " " : "", curve.k[i], curve.baseline[i], curve.reformulated[i]);
  }
  const double t = seconds_since(t0);
  report(5, "pilot study", curve.prompts == 200 && dominates && gap8 >= 0.10 && t < 600.0,
         fmt("%d failing prompts (%d screened); baseline/reformulated %s; gap at k=8 %.1f pp "
             "(>= 10), %.1f s",
             curve.prompts, curve.candidates, row.c_str(), 100 * gap8, t));
}

// --- 6 and 7 ------------------------------------------------------------------

void comparison_and_soundness() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c;  // 3 categories x 100 prompts, oracle verifier and ORM
  const auto r = run_compare(c);
  const double t = seconds_since(t0);
  const auto& g = r.summary("gridar");
  const auto& b4 = r.summary("best_of_4");
  const auto& b8 = r.summary("best_of_8");
  report(6, "method comparison", r.prompts.size() == 300 && g.rate >= b4.rate && t < 1200.0,
         fmt("300 prompts, paired seeds: GridAR(N=4) %.3f [%.3f, %.3f] >= Best-of-4 %.3f "
             "[%.3f, %.3f]; Best-of-8 %.3f at %lld tokens vs %lld, %.1f s",
             g.rate, g.ci_low, g.ci_high, b4.rate, b4.ci_low, b4.ci_high, b8.rate,
             static_cast<long long>(b8.totals.generated_tokens),
             static_cast<long long>(g.totals.generated_tokens), t));
  for (const auto& s : r.summaries) {
    info(fmt("%-36s %.3f  tokens %lld  retry tokens %lld  forced accepts %lld", s.method.c_str(),
             s.rate, static_cast<long long>(s.totals.generated_tokens),
             static_cast<long long>(s.totals.retry_tokens),
             static_cast<long long>(s.totals.forced_accepts)));
  }
  info("three-way CFG is the library default; on this toy model the rejected reformulated "
       "direction floods unmentioned types, so the bench default uses prompt replacement");

  // Pruning soundness: every final of every oracle-verified method is re-judged
  // at the boundaries it passed through.
  const SceneLM lm(c.canvas, c.model);
  const Palette& palette = c.model.palette;
  OracleVerifier oracle(palette);
  OracleReformulator reformulator(palette);
  OracleOrm orm(palette);
  std::map<std::string, std::pair<int, int>> unsound;  // method -> (finals, bad)
  for (const std::string name : {"gridar", "gridar_no_reformulation", "gridar_three_way"}) {
    const auto m = MethodSpec::parse(name, c.plan);
    auto& [finals, bad] = unsound[name];
    for (const auto& sp : r.prompts) {
      const auto o = run_gridar(m.plan, sp.prompt, lm, oracle, &reformulator, orm,
                                mix_seed(c.seed, {sp.seed}));
      for (const auto& f : o.finals) {
        ++finals;
        bool ok = true;
        for (int rows : {c.canvas.h / m.plan.R1, c.canvas.h / m.plan.R2}) {
          const TokenCanvas view(c.canvas, std::span(f.tokens).first(static_cast<size_t>(rows * c.canvas.w)));
          ok = ok && judge_partial(view, rows, sp.prompt, palette).possible();
        }
        bad += !ok;
      }
    }
  }

  // Determinism: rerun, and rerun with threads.
  const std::string first = r.report(c).dump(2);
  const std::string again = run_compare(c).report(c).dump(2);
  ExperimentConfig threaded = c;
  threaded.threads = 4;
  const std::string parallel = run_compare(threaded).report(threaded).dump(2);

  const auto& [gf, gb] = unsound["gridar"];
  const auto& [nf, nb] = unsound["gridar_no_reformulation"];
  report(7, "pruning soundness and determinism",
         gb == 0 && nb == 0 && first == again && first == parallel,
         fmt("%d + %d finals, %d + %d with an impossible ancestor prefix; rerun report %s, "
             "4-thread report %s",
             gf, nf, gb, nb, first == again ? "byte-identical" : "DIFFERS",
             first == parallel ? "byte-identical" : "DIFFERS"));
  const auto& [tf, tb] = unsound["gridar_three_way"];
  info(fmt("three-way: %d of %d finals passed a boundary only through the all-rejected fallback",
           tb, tf));
}

// --- 8 ----------------------------------------------------------------------

void replacement_rule() {
  const std::vector<Verdict> v = {{0, Judgment::possible, {}}, {1, Judgment::impossible, {}},
                                  {2, Judgment::possible, {}}, {3, Judgment::possible, {}}};
  const int n = 100000;
  std::map<int, int> counts;
  for (int trial = 0; trial < n; ++trial) {
    Rng rng = Rng::derive(8, {static_cast<std::uint64_t>(trial)});
    ++counts[replacement_sources(v, rng)[1]];
  }
  double worst = 0.0;
  std::string freq;
  for (int slot : {0, 2, 3}) {
    const double f = counts[slot] / static_cast<double>(n);
    worst = std::max(worst, std::abs(f - 1.0 / 3.0));
    freq += fmt("%sx%d %.4f", freq.empty() ? "" : ", ", slot + 1, f);
  }
  report(8, "replacement rule", counts.size() == 3 && worst <= 0.01,
         fmt("[P,I,P,P] over 10^5 trials: slot 2 filled by %s (1/3 +- 0.01)", freq.c_str()));
}

}  // namespace

int main() {
  cfg_identity();
  orthogonalization();
  budget_identity();
  sequence_distribution();
  pilot();
  comparison_and_soundness();
  replacement_rule();
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
