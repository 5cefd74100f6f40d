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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridar/pipeline.hpp"
#include "gridar/remote_verifier.hpp"
#include "gridar/scene_lm.hpp"

namespace gridar {

// --- prompt suites -----------------------------------------------------------

struct SuiteSpec {
  std::vector<std::string> categories = {"counting", "color_binding", "spatial_band"};
  int count_min = 2;
  int count_max = 9;
  int n_prompts = 100;  ///< per category
  std::uint64_t master_seed = 7;

  void validate() const;
};

struct SuitePrompt {
  std::string id;
  std::string category;
  ScenePrompt prompt;
  std::uint64_t seed = 0;  ///< shared by every method run on this prompt
};

/// Deterministic in `spec`. counting prompts use one object type; binding
/// prompts split the count over two or three types; spatial prompts pin the
/// count of one type to the top and bottom halves of the canvas.
std::vector<SuitePrompt> gen_suite(const SuiteSpec& spec, const CanvasSpec& canvas,
                                   const Palette& palette);

// --- experiment configuration ---------------------------------------------

struct ExperimentConfig {
  CanvasSpec canvas;
  SceneLMParams model;
  StagePlan plan = default_plan();
  SuiteSpec suite;
  std::vector<std::string> methods = {"gridar",
                                      "best_of_4",
                                      "best_of_8",
                                      "gridar_three_way",
                                      "gridar_no_verifier",
                                      "gridar_no_reformulation",
                                      "gridar_accept_all_no_reformulation"};
  std::string verifier = "oracle";  ///< oracle, noisy_oracle, remote or accept_all
  double verifier_error_rate = 0.0;  ///< noisy_oracle only
  RemoteEndpoint endpoint;           ///< remote only; the token is never saved
  bool verifier_per_cell = false;    ///< remote only; one cropped image per cell
  // pilot
  int pilot_prompts = 200;
  int pilot_count_min = 6;
  int pilot_count_max = 9;
  std::vector<int> pilot_k = {1, 2, 4, 8, 16, 32};
  int pilot_prefix_attempts = 64;
  std::uint64_t seed = 7;
  int threads = 1;  ///< scheduling only; not part of the saved config

  /// Bench default: prompt replacement, which behaves well on the toy model.
  static StagePlan default_plan();

  nlohmann::ordered_json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

// --- runs ----------------------------------------------------------------

/// One row of the method matrix.
struct MethodSpec {
  std::string name;
  bool best_of_n = false;
  int N = 4;  ///< best_of_n only
  StagePlan plan;
  bool accept_all = false;  ///< replace the verifier with AcceptAllVerifier

  /// Understands gridar, gridar_n8, gridar_three_way, gridar_replacement,
  /// gridar_two_way, gridar_no_verifier, gridar_no_reformulation,
  /// gridar_accept_all_no_reformulation and best_of_<N>.
  static MethodSpec parse(const std::string& name, const StagePlan& base);
};

struct RunRecord {
  std::string prompt_id;
  std::string category;
  std::string method;
  bool success = false;
  double score = 0.0;
  BudgetLedger ledger;
};

struct MethodSummary {
  std::string method;
  int runs = 0;
  int successes = 0;
  double rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  BudgetLedger totals;
};

/// Wilson score interval at the given z.
std::pair<double, double> wilson_interval(int successes, int n, double z = 1.96);

struct CompareResult {
  std::vector<SuitePrompt> prompts;
  std::vector<RunRecord> records;  ///< prompt-major, methods in config order
  std::vector<MethodSummary> summaries;

  const MethodSummary& summary(const std::string& method) const;
  /// Byte-stable report: config, seeds, summaries and per-prompt outcomes.
  nlohmann::ordered_json report(const ExperimentConfig& config) const;
  /// Columns prompt_id, category, method, success, tokens, forwards,
  /// verifier_calls, seconds.
  std::string csv() const;
};

/// Builds the verifier named by the config.
std::unique_ptr<Verifier> make_verifier(const ExperimentConfig& config);

CompareResult run_compare(const ExperimentConfig& config);

struct PilotCurve {
  std::vector<int> k;
  std::vector<double> baseline;
  std::vector<double> reformulated;
  int prompts = 0;         ///< failing prompts that yielded a usable prefix
  int candidates = 0;      ///< prompts examined
  int without_prefix = 0;  ///< failing prompts with no possible upper half

  nlohmann::ordered_json to_json() const;
  /// Columns k, baseline, reformulated.
  std::string csv() const;
};

/// Success-within-k study on single-type counting prompts. For each prompt whose
/// single sample fails, an upper half the oracle accepts is frozen and the
/// lower half is redrawn up to max(k) times, once under the original prompt
/// and once under its layout reformulation (paired trial seeds). Throws
/// NoFailingPrompts when no usable prompt is found.
PilotCurve run_pilot(const ExperimentConfig& config);

/// Writes report.json (deterministic), results.csv and timings.json.
void write_compare(const std::filesystem::path& dir, const ExperimentConfig& config,
                   const CompareResult& result);
/// Writes report.json and pilot.csv.
void write_pilot(const std::filesystem::path& dir, const ExperimentConfig& config,
                 const PilotCurve& curve);

}  // namespace gridar
