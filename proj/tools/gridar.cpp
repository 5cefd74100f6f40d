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

// gridar: prompt suites, the pilot study and method comparisons on the toy
// scene model.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "gridar/bench.hpp"
#include "gridar/errors.hpp"

namespace {

using gridar::ExperimentConfig;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string plan;
  std::string guidance;
  std::string verifier;
  std::string endpoint;
  std::string profile;
  std::optional<double> error_rate;
  std::optional<int> prompts;
  std::vector<std::string> methods;
  bool per_cell = false;
  int threads = 1;
};

void add_overrides(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "master seed (suite and runs)");
  app->add_option("--plan", o.plan, "stage plan as R1,R2");
  app->add_option("--guidance", o.guidance, "guidance mode")
      ->check(CLI::IsMember({"two_way", "three_way", "replacement"}));
  app->add_option("--verifier", o.verifier, "verifier")
      ->check(CLI::IsMember({"oracle", "noisy_oracle", "remote", "accept_all"}));
  app->add_option("--endpoint", o.endpoint, "remote verifier URL");
  app->add_option("--profile", o.profile, "remote wire profile")
      ->check(CLI::IsMember({"native", "openai"}));
  app->add_flag("--per-cell", o.per_cell, "send each grid cell to the remote verifier alone");
  app->add_option("--error-rate", o.error_rate, "flip rate for noisy_oracle");
  app->add_option("--prompts", o.prompts, "prompts per category (pilot: total)");
  app->add_option("--methods", o.methods, "methods to compare")->delimiter(',');
  app->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const Overrides& o, bool pilot) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(o.config);
  if (o.seed) {
    c.seed = *o.seed;
    c.suite.master_seed = *o.seed;
  }
  if (!o.plan.empty()) {
    char comma = 0;
    std::istringstream in(o.plan);
    if (!(in >> c.plan.R1 >> comma >> c.plan.R2) || comma != ',' || !in.eof()) {
      throw gridar::ConfigError("--plan expects R1,R2");
    }
  }
  if (!o.guidance.empty()) c.plan.guidance.mode = gridar::parse_guidance_mode(o.guidance);
  if (!o.verifier.empty()) c.verifier = o.verifier;
  if (!o.endpoint.empty()) c.endpoint.url = o.endpoint;
  if (o.profile == "openai") c.endpoint.profile = gridar::WireProfile::openai;
  if (o.profile == "native") c.endpoint.profile = gridar::WireProfile::native;
  if (o.per_cell) c.verifier_per_cell = true;
  if (o.error_rate) c.verifier_error_rate = *o.error_rate;
  if (o.prompts) (pilot ? c.pilot_prompts : c.suite.n_prompts) = *o.prompts;
  if (!o.methods.empty()) c.methods = o.methods;
  c.threads = o.threads;
  return c;
}

void print_summary(const gridar::CompareResult& r) {
  std::printf("%-36s %8s %17s %10s %10s %8s\n", "method", "success", "95% CI", "tokens",
              "forwards", "verifier");
  for (const auto& s : r.summaries) {
    std::printf("%-36s %8.3f   [%.3f, %.3f] %10lld %10lld %8lld\n", s.method.c_str(), s.rate,
                s.ci_low, s.ci_high, static_cast<long long>(s.totals.generated_tokens),
                static_cast<long long>(s.totals.forward.total()),
                static_cast<long long>(s.totals.verifier_calls));
  }
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int replay(const std::filesystem::path& report_path, const std::filesystem::path& out,
           int threads) {
  const std::string original = slurp(report_path);
  const auto j = nlohmann::json::parse(original, nullptr, false);
  if (j.is_discarded() || !j.contains("kind") || !j.contains("config")) {
    throw gridar::ConfigError(report_path.string() + " is not a report");
  }
  ExperimentConfig c = ExperimentConfig::from_json(j["config"]);
  c.threads = threads;
  if (j["kind"] == "pilot") {
    gridar::write_pilot(out, c, gridar::run_pilot(c));
  } else {
    gridar::write_compare(out, c, gridar::run_compare(c));
  }
  const bool same = slurp(out / "report.json") == original;
  std::printf("%s: %s\n", (out / "report.json").c_str(), same ? "identical" : "DIFFERS");
  return same ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GridAR inference-time scaling on a toy scene model"};
  app.require_subcommand(1);

  Overrides suite_o, pilot_o, compare_o;
  std::string suite_out, pilot_out = "out/pilot", compare_out = "out/compare",
                         replay_out = "out/replay", replay_report;
  int replay_threads = 1;

  auto* suite = app.add_subcommand("suite", "emit the prompt suite as JSON lines");
  add_overrides(suite, suite_o);
  suite->add_option("--out", suite_out, "output file (default stdout)");

  auto* pilot = app.add_subcommand("pilot", "success-within-k curves, original vs reformulated");
  add_overrides(pilot, pilot_o);
  pilot->add_option("--out", pilot_out, "output directory")->capture_default_str();

  auto* compare = app.add_subcommand("compare", "GridAR vs Best-of-N and ablations");
  add_overrides(compare, compare_o);
  compare->add_option("--out", compare_out, "output directory")->capture_default_str();

  auto* rep = app.add_subcommand("replay", "rerun a report and check it is byte-identical");
  rep->add_option("report", replay_report, "report.json to replay")
      ->required()
      ->check(CLI::ExistingFile);
  rep->add_option("--out", replay_out, "output directory")->capture_default_str();
  rep->add_option("--threads", replay_threads, "worker threads")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*suite) {
      const auto c = resolve(suite_o, false);
      const auto prompts = gridar::gen_suite(c.suite, c.canvas, c.model.palette);
      std::ostringstream text;
      for (const auto& p : prompts) {
        text << nlohmann::ordered_json{{"id", p.id},
                                       {"category", p.category},
                                       {"prompt", p.prompt.text()},
                                       {"seed", p.seed}}
                    .dump()
             << '\n';
      }
      if (suite_out.empty()) {
        std::cout << text.str();
      } else {
        std::ofstream(suite_out, std::ios::binary) << text.str();
      }
    } else if (*pilot) {
      const auto c = resolve(pilot_o, true);
      const auto curve = gridar::run_pilot(c);
      gridar::write_pilot(pilot_out, c, curve);
      std::printf("%d failing prompts (%d examined)\n%s", curve.prompts, curve.candidates,
                  curve.csv().c_str());
    } else if (*compare) {
      const auto c = resolve(compare_o, false);
      const auto result = gridar::run_compare(c);
      gridar::write_compare(compare_out, c, result);
      print_summary(result);
    } else if (*rep) {
      return replay(replay_report, replay_out, replay_threads);
    }
  } catch (const gridar::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
