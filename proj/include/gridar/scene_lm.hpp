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

#include <vector>

#include "gridar/model.hpp"

namespace gridar {

/// Closed-form weights of the toy scene model. Logits are natural logs of
/// these weights; a zero weight becomes -infinity.
struct SceneLMParams {
  double beta_bg = 4.0;          ///< background weight
  double alpha = 1.0;            ///< scale for a required object type
  double alpha_spurious = 0.01;  ///< object types the prompt does not mention
  double alpha_uncond = 0.05;    ///< every object type under the null prompt
  double gamma_eager = 2.0;      ///< multiplier on the top quarter of rows
  double temperature = 1.0;
  /// Fraction of an undirected object's count the model forgets per row of
  /// distance when tallying what it already drew. 0 means exact recall.
  double recall_decay = 7e-4;
  Palette palette;

  void validate() const;
};

/// Toy text-to-scene model with one token per object.
///
/// For a required type t at position p (row r):
///   - if a directive of the condition covers (t, r): need = quota - count of
///     t inside that directive's band;
///   - otherwise need = total(t) - sum over earlier tokens of type t of
///     (1 - recall_decay)^(r - row(token)).
///   weight(t) = alpha * max(0, need) * (gamma_eager if r < h/4 else 1).
/// Unrequired types get alpha_spurious and the background gets beta_bg. The
/// null prompt gives every object alpha_uncond.
///
/// Recall decay is what makes the model myopic: objects drawn many rows ago
/// stop counting fully, so undirected decoding re-draws them near the bottom
/// of the canvas. Band directives are counted exactly and do not decay.
class SceneLM final : public ArModel {
 public:
  SceneLM(CanvasSpec spec, SceneLMParams params = {});

  const CanvasSpec& spec() const override { return spec_; }
  const SceneLMParams& params() const { return params_; }
  const Palette& palette() const { return params_.palette; }
  double temperature() const override { return params_.temperature; }

  ModelSession open(Condition condition) const override;
  Logits next_logits(const ModelSession& session, int position) const override;

 private:
  CanvasSpec spec_;
  SceneLMParams params_;
  std::vector<double> retention_;  // (1 - recall_decay)^d for d in [0, h)
};

}  // namespace gridar
