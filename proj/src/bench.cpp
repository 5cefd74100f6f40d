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

#include "gridar/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gridar/errors.hpp"
#include "gridar/parallel.hpp"

namespace gridar {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::uint64_t kPilotKey = 0x50494c4fULL;   // "PILO"
constexpr std::uint64_t kPrefixKey = 0x50524546ULL;  // "PREF"
constexpr std::uint64_t kTrialKey = 0x5452494cULL;   // "TRIL"
constexpr std::uint64_t kSeedKey = 0x53454544ULL;    // "SEED"

std::uint64_t category_key(const std::string& category) {
  if (category == "counting") return 1;
  if (category == "color_binding") return 2;
  if (category == "spatial_band") return 3;
  throw ConfigError("unknown suite category '" + category + "'");
}

ObjectType random_type(const Palette& palette, Rng& rng) {
  const int obj = static_cast<int>(rng.below(static_cast<std::uint64_t>(palette.object_count())));
  return *palette.type_of(obj + 1);
}

void check_keys(const json& j, std::initializer_list<const char*> known, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::string profile_name(WireProfile p) { return p == WireProfile::openai ? "openai" : "native"; }

WireProfile parse_profile(const std::string& name) {
  if (name == "native") return WireProfile::native;
  if (name == "openai") return WireProfile::openai;
  throw ConfigError("unknown wire profile '" + name + "'");
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Two-sided exact sign test on discordant pairs.
double sign_test(int a, int b) {
  const int n = a + b;
  if (n == 0) return 1.0;
  const int k = std::min(a, b);
  double tail = 0.0;
  for (int i = 0; i <= k; ++i) {
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
                     n * std::log(2.0));
  }
  return std::min(1.0, 2.0 * tail);
}

}  // namespace

// --- suites ---------------------------------------------------------------

void SuiteSpec::validate() const {
  if (categories.empty() || n_prompts < 1) throw EmptySpec("suite has no prompts to generate");
  for (const auto& c : categories) category_key(c);
  if (count_min < 1 || count_max < count_min) {
    throw ConfigError("count range must satisfy 1 <= min <= max");
  }
}

std::vector<SuitePrompt> gen_suite(const SuiteSpec& spec, const CanvasSpec& canvas,
                                   const Palette& palette) {
  spec.validate();
  std::vector<SuitePrompt> out;
  for (const auto& category : spec.categories) {
    const std::uint64_t ck = category_key(category);
    for (int i = 0; i < spec.n_prompts; ++i) {
      Rng rng = Rng::derive(spec.master_seed, {ck, static_cast<std::uint64_t>(i)});
      const int n = spec.count_min + static_cast<int>(rng.below(
                                         static_cast<std::uint64_t>(spec.count_max - spec.count_min + 1)));
      ScenePrompt p;
      if (category == "counting") {
        p.requirements.push_back({n, random_type(palette, rng)});
      } else if (category == "color_binding") {
        const int m = std::min(n, 2 + static_cast<int>(rng.below(2)));
        std::vector<int> objects(static_cast<size_t>(palette.object_count()));
        std::iota(objects.begin(), objects.end(), 0);
        for (int a = 0; a < m; ++a) {  // partial Fisher-Yates
          const auto b = a + static_cast<int>(rng.below(static_cast<std::uint64_t>(
                                 palette.object_count() - a)));
          std::swap(objects[static_cast<size_t>(a)], objects[static_cast<size_t>(b)]);
        }
        std::vector<int> counts(static_cast<size_t>(m), 1);
        for (int extra = n - m; extra > 0; --extra) {
          ++counts[static_cast<size_t>(rng.below(static_cast<std::uint64_t>(m)))];
        }
        for (int a = 0; a < m; ++a) {
          p.requirements.push_back(
              {counts[static_cast<size_t>(a)], *palette.type_of(objects[static_cast<size_t>(a)] + 1)});
        }
      } else {
        const ObjectType t = random_type(palette, rng);
        const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(n + 1)));
        const int half = canvas.h / 2;
        p.requirements.push_back({n, t});
        p.directives.push_back({0, half, {{top, t}}});
        p.directives.push_back({half, canvas.h, {{n - top, t}}});
      }
      p.validate(palette, canvas.h);

      char id[64];
      std::snprintf(id, sizeof id, "%s-%03d", category.c_str(), i);
      out.push_back({id, category, std::move(p),
                     mix_seed(spec.master_seed, {ck, static_cast<std::uint64_t>(i), kSeedKey})});
    }
  }
  return out;
}

// --- config ---------------------------------------------------------------

StagePlan ExperimentConfig::default_plan() {
  StagePlan plan;
  plan.guidance.mode = GuidanceMode::replacement;
  return plan;
}

ordered_json ExperimentConfig::to_json() const {
  ordered_json reform = ordered_json::array();
  for (int s : plan.reformulate_at) reform.push_back(s);
  return {
      {"canvas", {{"h", canvas.h}, {"w", canvas.w}, {"K", canvas.K}, {"tile_px", canvas.tile_px}}},
      {"model",
       {{"beta_bg", model.beta_bg},
        {"alpha", model.alpha},
        {"alpha_spurious", model.alpha_spurious},
        {"alpha_uncond", model.alpha_uncond},
        {"gamma_eager", model.gamma_eager},
        {"temperature", model.temperature},
        {"recall_decay", model.recall_decay},
        {"n_colors", model.palette.n_colors},
        {"n_shapes", model.palette.n_shapes}}},
      {"plan",
       {{"R1", plan.R1},
        {"R2", plan.R2},
        {"n_start_canvases", plan.n_start_canvases},
        {"reformulate_at", reform},
        {"guidance",
         {{"mode", to_string(plan.guidance.mode)},
          {"s_o", plan.guidance.s_o},
          {"s_r", plan.guidance.s_r},
          {"eps_parallel", plan.guidance.eps_parallel},
          {"floor", plan.guidance.floor}}},
        {"all_rejected_policy", to_string(plan.all_rejected_policy)}}},
      {"suite",
       {{"categories", suite.categories},
        {"count_min", suite.count_min},
        {"count_max", suite.count_max},
        {"n_prompts", suite.n_prompts},
        {"master_seed", suite.master_seed}}},
      {"methods", methods},
      {"verifier",
       {{"kind", verifier},
        {"error_rate", verifier_error_rate},
        {"endpoint",
         {{"url", endpoint.url},
          {"profile", profile_name(endpoint.profile)},
          {"model", endpoint.model},
          {"timeout_ms", endpoint.timeout.count()},
          {"retries", endpoint.retries}}},
        {"per_cell", verifier_per_cell}}},
      {"pilot",
       {{"prompts", pilot_prompts},
        {"count_min", pilot_count_min},
        {"count_max", pilot_count_max},
        {"k", pilot_k},
        {"prefix_attempts", pilot_prefix_attempts}}},
      {"seed", seed},
  };
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j, {"canvas", "model", "plan", "suite", "methods", "verifier", "pilot", "seed"},
             "config");
  if (j.contains("canvas")) {
    const auto& k = j["canvas"];
    check_keys(k, {"h", "w", "K", "tile_px"}, "canvas");
    read(k, "h", c.canvas.h);
    read(k, "w", c.canvas.w);
    read(k, "K", c.canvas.K);
    read(k, "tile_px", c.canvas.tile_px);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, {"beta_bg", "alpha", "alpha_spurious", "alpha_uncond", "gamma_eager",
                   "temperature", "recall_decay", "n_colors", "n_shapes"},
               "model");
    read(m, "beta_bg", c.model.beta_bg);
    read(m, "alpha", c.model.alpha);
    read(m, "alpha_spurious", c.model.alpha_spurious);
    read(m, "alpha_uncond", c.model.alpha_uncond);
    read(m, "gamma_eager", c.model.gamma_eager);
    read(m, "temperature", c.model.temperature);
    read(m, "recall_decay", c.model.recall_decay);
    read(m, "n_colors", c.model.palette.n_colors);
    read(m, "n_shapes", c.model.palette.n_shapes);
  }
  if (j.contains("plan")) {
    const auto& p = j["plan"];
    check_keys(p, {"R1", "R2", "n_start_canvases", "reformulate_at", "guidance",
                   "all_rejected_policy"},
               "plan");
    read(p, "R1", c.plan.R1);
    read(p, "R2", c.plan.R2);
    read(p, "n_start_canvases", c.plan.n_start_canvases);
    if (p.contains("reformulate_at")) {
      std::vector<int> stages;
      read(p, "reformulate_at", stages);
      c.plan.reformulate_at = {stages.begin(), stages.end()};
    }
    if (p.contains("guidance")) {
      const auto& g = p["guidance"];
      check_keys(g, {"mode", "s_o", "s_r", "eps_parallel", "floor"}, "guidance");
      std::string mode = to_string(c.plan.guidance.mode);
      read(g, "mode", mode);
      c.plan.guidance.mode = parse_guidance_mode(mode);
      read(g, "s_o", c.plan.guidance.s_o);
      read(g, "s_r", c.plan.guidance.s_r);
      read(g, "eps_parallel", c.plan.guidance.eps_parallel);
      read(g, "floor", c.plan.guidance.floor);
    }
    std::string policy = to_string(c.plan.all_rejected_policy);
    read(p, "all_rejected_policy", policy);
    c.plan.all_rejected_policy = parse_all_rejected_policy(policy);
  }
  if (j.contains("suite")) {
    const auto& s = j["suite"];
    check_keys(s, {"categories", "count_min", "count_max", "n_prompts", "master_seed"}, "suite");
    read(s, "categories", c.suite.categories);
    read(s, "count_min", c.suite.count_min);
    read(s, "count_max", c.suite.count_max);
    read(s, "n_prompts", c.suite.n_prompts);
    read(s, "master_seed", c.suite.master_seed);
  }
  read(j, "methods", c.methods);
  if (j.contains("verifier")) {
    const auto& v = j["verifier"];
    check_keys(v, {"kind", "error_rate", "endpoint", "per_cell"}, "verifier");
    read(v, "kind", c.verifier);
    read(v, "per_cell", c.verifier_per_cell);
    read(v, "error_rate", c.verifier_error_rate);
    if (v.contains("endpoint")) {
      const auto& e = v["endpoint"];
      check_keys(e, {"url", "profile", "model", "timeout_ms", "retries"}, "endpoint");
      read(e, "url", c.endpoint.url);
      std::string profile = profile_name(c.endpoint.profile);
      read(e, "profile", profile);
      c.endpoint.profile = parse_profile(profile);
      read(e, "model", c.endpoint.model);
      std::int64_t ms = c.endpoint.timeout.count();
      read(e, "timeout_ms", ms);
      c.endpoint.timeout = std::chrono::milliseconds(ms);
      read(e, "retries", c.endpoint.retries);
    }
  }
  if (j.contains("pilot")) {
    const auto& p = j["pilot"];
    check_keys(p, {"prompts", "count_min", "count_max", "k", "prefix_attempts"}, "pilot");
    read(p, "prompts", c.pilot_prompts);
    read(p, "count_min", c.pilot_count_min);
    read(p, "count_max", c.pilot_count_max);
    read(p, "k", c.pilot_k);
    read(p, "prefix_attempts", c.pilot_prefix_attempts);
  }
  read(j, "seed", c.seed);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  return from_json(j);
}

// --- methods --------------------------------------------------------------

MethodSpec MethodSpec::parse(const std::string& name, const StagePlan& base) {
  MethodSpec m;
  m.name = name;
  m.plan = base;
  if (name.rfind("best_of_", 0) == 0) {
    m.best_of_n = true;
    try {
      size_t used = 0;
      m.N = std::stoi(name.substr(8), &used);
      if (used != name.size() - 8 || m.N < 1) throw std::invalid_argument(name);
    } catch (const std::exception&) {
      throw ConfigError("bad method '" + name + "'");
    }
    return m;
  }
  if (name == "gridar") return m;
  if (name == "gridar_n8") {
    m.plan.n_start_canvases = 2 * base.n_start_canvases;
  } else if (name == "gridar_three_way") {
    m.plan.guidance.mode = GuidanceMode::three_way;
  } else if (name == "gridar_replacement") {
    m.plan.guidance.mode = GuidanceMode::replacement;
  } else if (name == "gridar_two_way") {
    m.plan.guidance.mode = GuidanceMode::two_way;
  } else if (name == "gridar_no_verifier") {
    m.accept_all = true;
  } else if (name == "gridar_no_reformulation") {
    m.plan.reformulate_at.clear();
  } else if (name == "gridar_accept_all_no_reformulation") {
    m.accept_all = true;
    m.plan.reformulate_at.clear();
  } else {
    throw ConfigError("unknown method '" + name + "'");
  }
  return m;
}

std::pair<double, double> wilson_interval(int successes, int n, double z) {
  if (n <= 0) return {0.0, 1.0};
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::unique_ptr<Verifier> make_verifier(const ExperimentConfig& config) {
  const Palette& palette = config.model.palette;
  if (config.verifier == "oracle") return std::make_unique<OracleVerifier>(palette);
  if (config.verifier == "noisy_oracle") {
    return std::make_unique<NoisyOracleVerifier>(palette, config.verifier_error_rate,
                                                 config.seed);
  }
  if (config.verifier == "accept_all") return std::make_unique<AcceptAllVerifier>();
  if (config.verifier == "remote") {
    if (config.endpoint.url.empty()) throw ConfigError("remote verifier needs an endpoint");
    RemoteEndpoint endpoint = config.endpoint;
    if (endpoint.auth_token.empty()) endpoint.auth_token = RemoteEndpoint::token_from_env();
    return std::make_unique<RemoteVerifier>(endpoint, palette, "png", config.verifier_per_cell);
  }
  throw ConfigError("unknown verifier '" + config.verifier + "'");
}

// --- compare --------------------------------------------------------------

const MethodSummary& CompareResult::summary(const std::string& method) const {
  for (const auto& s : summaries) {
    if (s.method == method) return s;
  }
  throw OutOfRange("no summary for method '" + method + "'");
}

CompareResult run_compare(const ExperimentConfig& config) {
  const SceneLM model(config.canvas, config.model);
  const Palette& palette = model.palette();

  std::vector<MethodSpec> methods;
  for (const auto& name : config.methods) methods.push_back(MethodSpec::parse(name, config.plan));
  if (methods.empty()) throw EmptySpec("no methods to compare");
  for (const auto& m : methods) {
    if (!m.best_of_n) m.plan.validate(model.spec());
  }

  CompareResult result;
  result.prompts = gen_suite(config.suite, config.canvas, palette);
  const auto verifier = make_verifier(config);
  AcceptAllVerifier accept_all;
  OracleOrm orm(palette);
  const bool remote = config.verifier == "remote";

  const size_t n_methods = methods.size();
  result.records.resize(result.prompts.size() * n_methods);
  parallel_for(static_cast<int>(result.prompts.size()), config.threads, [&](int pi) {
    const auto& sp = result.prompts[static_cast<size_t>(pi)];
    const std::uint64_t seed = mix_seed(config.seed, {sp.seed});
    OracleReformulator reformulator(palette);
    for (size_t mi = 0; mi < n_methods; ++mi) {
      const auto& m = methods[mi];
      Outcome o;
      if (m.best_of_n) {
        o = run_best_of_n(m.N, sp.prompt, model, m.plan.guidance, orm, seed);
      } else {
        Verifier& v = m.accept_all ? static_cast<Verifier&>(accept_all) : *verifier;
        Reformulator* r = (remote && !m.accept_all) ? nullptr : &reformulator;
        o = run_gridar(m.plan, sp.prompt, model, v, r, orm, seed);
      }
      auto& rec = result.records[static_cast<size_t>(pi) * n_methods + mi];
      rec.prompt_id = sp.id;
      rec.category = sp.category;
      rec.method = m.name;
      rec.score = o.best_score();
      rec.success = rec.score == 0.0;
      rec.ledger = o.ledger;
    }
  });

  for (size_t mi = 0; mi < n_methods; ++mi) {
    MethodSummary s;
    s.method = methods[mi].name;
    for (size_t pi = 0; pi < result.prompts.size(); ++pi) {
      const auto& rec = result.records[pi * n_methods + mi];
      ++s.runs;
      s.successes += rec.success;
      s.totals += rec.ledger;
    }
    s.rate = static_cast<double>(s.successes) / s.runs;
    std::tie(s.ci_low, s.ci_high) = wilson_interval(s.successes, s.runs);
    result.summaries.push_back(std::move(s));
  }
  return result;
}

ordered_json CompareResult::report(const ExperimentConfig& config) const {
  ordered_json methods = ordered_json::array();
  for (const auto& s : summaries) {
    methods.push_back({{"method", s.method},
                       {"runs", s.runs},
                       {"successes", s.successes},
                       {"success_rate", s.rate},
                       {"ci95", {s.ci_low, s.ci_high}},
                       {"budget", s.totals.to_json()}});
  }

  // Paired comparison of every method against the first Best-of-N row.
  ordered_json paired = ordered_json::array();
  const size_t n_methods = summaries.size();
  std::optional<size_t> ref;
  for (size_t mi = 0; mi < n_methods; ++mi) {
    if (summaries[mi].method.rfind("best_of_", 0) == 0) {
      ref = mi;
      break;
    }
  }
  if (ref) {
    for (size_t mi = 0; mi < n_methods; ++mi) {
      if (mi == *ref) continue;
      int only_method = 0, only_ref = 0;
      for (size_t pi = 0; pi < prompts.size(); ++pi) {
        const bool a = records[pi * n_methods + mi].success;
        const bool b = records[pi * n_methods + *ref].success;
        only_method += a && !b;
        only_ref += b && !a;
      }
      paired.push_back({{"method", summaries[mi].method},
                        {"reference", summaries[*ref].method},
                        {"only_method", only_method},
                        {"only_reference", only_ref},
                        {"sign_test_p", sign_test(only_method, only_ref)}});
    }
  }

  ordered_json per_prompt = ordered_json::array();
  for (size_t pi = 0; pi < prompts.size(); ++pi) {
    const auto& sp = prompts[pi];
    ordered_json runs = ordered_json::array();
    for (size_t mi = 0; mi < n_methods; ++mi) {
      const auto& rec = records[pi * n_methods + mi];
      runs.push_back({{"method", rec.method},
                      {"success", rec.success},
                      {"score", rec.score},
                      {"tokens", rec.ledger.generated_tokens},
                      {"retry_tokens", rec.ledger.retry_tokens},
                      {"forwards", rec.ledger.forward.total()},
                      {"verifier_calls", rec.ledger.verifier_calls}});
    }
    per_prompt.push_back({{"id", sp.id},
                          {"category", sp.category},
                          {"prompt", sp.prompt.text()},
                          {"seed", sp.seed},
                          {"runs", runs}});
  }
  return {{"kind", "compare"},
          {"config", config.to_json()},
          {"methods", methods},
          {"paired", paired},
          {"prompts", per_prompt}};
}

std::string CompareResult::csv() const {
  std::ostringstream out;
  out << "prompt_id,category,method,success,tokens,forwards,verifier_calls,seconds\n";
  for (const auto& r : records) {
    out << r.prompt_id << ',' << r.category << ',' << r.method << ',' << (r.success ? 1 : 0)
        << ',' << r.ledger.generated_tokens << ',' << r.ledger.forward.total() << ','
        << r.ledger.verifier_calls << ',' << fixed(r.ledger.wall_clock, 6) << '\n';
  }
  return out.str();
}

// --- pilot ----------------------------------------------------------------

ordered_json PilotCurve::to_json() const {
  return {{"k", k},
          {"baseline", baseline},
          {"reformulated", reformulated},
          {"prompts", prompts},
          {"candidates", candidates},
          {"without_prefix", without_prefix}};
}

std::string PilotCurve::csv() const {
  std::ostringstream out;
  out << "k,baseline,reformulated\n";
  for (size_t i = 0; i < k.size(); ++i) {
    out << k[i] << ',' << fixed(baseline[i], 6) << ',' << fixed(reformulated[i], 6) << '\n';
  }
  return out.str();
}

PilotCurve run_pilot(const ExperimentConfig& config) {
  const SceneLM model(config.canvas, config.model);
  const Palette& palette = model.palette();
  const auto& spec = model.spec();
  if (config.pilot_k.empty() || config.pilot_prompts < 1) throw EmptySpec("empty pilot");
  if (config.pilot_count_min < 1 || config.pilot_count_max < config.pilot_count_min) {
    throw ConfigError("pilot count range must satisfy 1 <= min <= max");
  }
  const int k_max = *std::max_element(config.pilot_k.begin(), config.pilot_k.end());
  const int half = (spec.h / 2) * spec.w;
  const GuidanceConfig baseline_guidance = config.plan.guidance;
  GuidanceConfig reform_guidance = config.plan.guidance;
  reform_guidance.mode = GuidanceMode::replacement;  // the pilot swaps the prompt outright
  OracleOrm orm(palette);

  struct Case {
    ScenePrompt prompt;
    std::uint64_t seed;
    TokenSequence prefix;
  };
  std::vector<Case> cases;
  PilotCurve curve;
  const int max_candidates = config.pilot_prompts * 100;
  const std::uint64_t count_span =
      static_cast<std::uint64_t>(config.pilot_count_max - config.pilot_count_min + 1);

  // Candidates are screened in fixed-size batches so the accepted set does not
  // depend on the thread count.
  const int batch = 64;
  for (int first = 0; static_cast<int>(cases.size()) < config.pilot_prompts &&
                      first < max_candidates;
       first += batch) {
    std::vector<std::optional<Case>> found(static_cast<size_t>(batch));
    std::vector<char> no_prefix(static_cast<size_t>(batch), 0);
    parallel_for(batch, config.threads, [&](int b) {
      const int i = first + b;
      Rng rng = Rng::derive(config.seed, {kPilotKey, static_cast<std::uint64_t>(i)});
      const int n = config.pilot_count_min + static_cast<int>(rng.below(count_span));
      ScenePrompt prompt;
      prompt.requirements.push_back({n, random_type(palette, rng)});
      const std::uint64_t seed = rng.next();

      const Outcome single = run_best_of_n(1, prompt, model, baseline_guidance, orm, seed);
      if (single.best_score() == 0.0) return;
      // Prefer the failing sample's own upper half, then fresh draws.
      TokenSequence prefix(single.finals[0].tokens.begin(),
                           single.finals[0].tokens.begin() + half);
      const PromptBundle bundle(prompt);
      for (int a = 0;; ++a) {
        if (judge_partial(TokenCanvas(spec, prefix), spec.h / 2, prompt, palette).possible()) {
          found[static_cast<size_t>(b)] = Case{prompt, seed, std::move(prefix)};
          return;
        }
        if (a >= config.pilot_prefix_attempts) break;
        Rng prng = Rng::derive(seed, {kPrefixKey, static_cast<std::uint64_t>(a)});
        Tally tally;
        prefix = sample_continuation(model, bundle, baseline_guidance, {}, half, prng, tally);
      }
      no_prefix[static_cast<size_t>(b)] = 1;
    });
    for (int b = 0; b < batch && static_cast<int>(cases.size()) < config.pilot_prompts; ++b) {
      ++curve.candidates;
      if (found[static_cast<size_t>(b)]) {
        cases.push_back(std::move(*found[static_cast<size_t>(b)]));
      } else if (no_prefix[static_cast<size_t>(b)]) {
        ++curve.without_prefix;
      }
    }
  }
  if (cases.empty()) throw NoFailingPrompts("no failing prompt with a possible upper half");
  curve.prompts = static_cast<int>(cases.size());

  // First successful trial (1-based) per case, or 0.
  std::vector<int> first_base(cases.size(), 0), first_reform(cases.size(), 0);
  parallel_for(static_cast<int>(cases.size()), config.threads, [&](int ci) {
    const auto& c = cases[static_cast<size_t>(ci)];
    const PromptBundle base(c.prompt);
    const CountTable visible = scene_counts(TokenCanvas(spec, c.prefix),
                                            partition_rows(spec, spec.h), palette)
                                   .topRows(spec.h / 2);
    const PromptBundle reform =
        base.with_reformulation(oracle_reformulate(c.prompt, visible, spec.h, palette));
    for (int t = 0; t < k_max; ++t) {
      const Rng trial = Rng::derive(c.seed, {kTrialKey, static_cast<std::uint64_t>(t)});
      Tally tally;
      if (!first_base[static_cast<size_t>(ci)]) {
        Rng rng = trial;
        const auto img =
            sample_continuation(model, base, baseline_guidance, c.prefix, spec.token_count(), rng, tally);
        if (oracle_orm(TokenCanvas(spec, img), c.prompt, palette).score == 0.0) {
          first_base[static_cast<size_t>(ci)] = t + 1;
        }
      }
      if (!first_reform[static_cast<size_t>(ci)]) {
        Rng rng = trial;
        const auto img =
            sample_continuation(model, reform, reform_guidance, c.prefix, spec.token_count(), rng, tally);
        if (oracle_orm(TokenCanvas(spec, img), c.prompt, palette).score == 0.0) {
          first_reform[static_cast<size_t>(ci)] = t + 1;
        }
      }
      if (first_base[static_cast<size_t>(ci)] && first_reform[static_cast<size_t>(ci)]) break;
    }
  });

  auto within = [&](const std::vector<int>& first, int k) {
    int n = 0;
    for (int f : first) n += f > 0 && f <= k;
    return static_cast<double>(n) / static_cast<double>(first.size());
  };
  for (int k : config.pilot_k) {
    curve.k.push_back(k);
    curve.baseline.push_back(within(first_base, k));
    curve.reformulated.push_back(within(first_reform, k));
  }
  return curve;
}

// --- output ---------------------------------------------------------------

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_compare(const std::filesystem::path& dir, const ExperimentConfig& config,
                   const CompareResult& result) {
  std::filesystem::create_directories(dir);
  write_file(dir / "report.json", result.report(config).dump(2) + "\n");
  write_file(dir / "results.csv", result.csv());
  ordered_json timings = ordered_json::object();
  for (const auto& s : result.summaries) timings[s.method] = s.totals.wall_clock;
  write_file(dir / "timings.json", timings.dump(2) + "\n");
}

void write_pilot(const std::filesystem::path& dir, const ExperimentConfig& config,
                 const PilotCurve& curve) {
  std::filesystem::create_directories(dir);
  const ordered_json report{{"kind", "pilot"}, {"config", config.to_json()}, {"curve", curve.to_json()}};
  write_file(dir / "report.json", report.dump(2) + "\n");
  write_file(dir / "pilot.csv", curve.csv());
}

}  // namespace gridar
