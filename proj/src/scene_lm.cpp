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

#include "gridar/scene_lm.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "gridar/errors.hpp"

namespace gridar {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Object tallies per (row, object index).
class SceneState final : public SessionState {
 public:
  SceneState(int h, int w, int objects)
      : w_(w), objects_(objects), counts_(static_cast<size_t>(h * objects), 0) {}

  std::unique_ptr<SessionState> clone() const override {
    return std::make_unique<SceneState>(*this);
  }

  void append(TokenId token, int position) override {
    if (token > 0) {
      ++counts_[static_cast<size_t>((position / w_) * objects_ + token - 1)];
    }
  }

  int count(int row, int object) const {
    return counts_[static_cast<size_t>(row * objects_ + object)];
  }

 private:
  int w_;
  int objects_;
  std::vector<int> counts_;
};

double safe_log(double weight) { return weight > 0.0 ? std::log(weight) : kNegInf; }

}  // namespace

void SceneLMParams::validate() const {
  palette.validate();
  if (!(beta_bg > 0 && alpha > 0 && alpha_spurious > 0 && alpha_uncond > 0)) {
    throw InvalidPrompt("SceneLM weights must be positive");
  }
  if (!(gamma_eager >= 1.0)) throw InvalidPrompt("gamma_eager must be >= 1");
  if (!(temperature > 0.0)) throw InvalidPrompt("temperature must be positive");
  if (!(recall_decay >= 0.0 && recall_decay < 1.0)) {
    throw InvalidPrompt("recall_decay must lie in [0, 1)");
  }
}

SceneLM::SceneLM(CanvasSpec spec, SceneLMParams params)
    : spec_(spec), params_(params) {
  spec_.validate();
  params_.validate();
  if (spec_.K != params_.palette.codebook_size()) {
    throw ShapeMismatch("canvas K=" + std::to_string(spec_.K) +
                        " does not match palette size " +
                        std::to_string(params_.palette.codebook_size()));
  }
  retention_.resize(static_cast<size_t>(spec_.h));
  for (int d = 0; d < spec_.h; ++d) {
    retention_[static_cast<size_t>(d)] = std::pow(1.0 - params_.recall_decay, d);
  }
}

ModelSession SceneLM::open(Condition condition) const {
  if (condition.kind != ConditionKind::unconditional) {
    if (!condition.prompt) throw InvalidPrompt("conditional session without a prompt");
    condition.prompt->validate(params_.palette, spec_.h);
  }
  return ModelSession(std::move(condition),
                      std::make_unique<SceneState>(spec_.h, spec_.w,
                                                   params_.palette.object_count()));
}

Logits SceneLM::next_logits(const ModelSession& session, int position) const {
  if (position != session.length()) {
    throw NonSequentialAccess("requested position " + std::to_string(position) +
                              " but session holds " +
                              std::to_string(session.length()) + " tokens");
  }
  if (position >= spec_.token_count()) throw OutOfRange("canvas already complete");

  const auto& palette = params_.palette;
  Logits logits(spec_.K);
  logits(kBackground) = std::log(params_.beta_bg);

  const ScenePrompt* prompt = session.condition().prompt.get();
  if (session.condition().kind == ConditionKind::unconditional || !prompt) {
    logits.tail(spec_.K - 1).setConstant(std::log(params_.alpha_uncond));
    return logits;
  }

  const auto& state = static_cast<const SceneState&>(*session.cache());
  const int row = position / spec_.w;
  const double eager = row < spec_.h / 4 ? params_.gamma_eager : 1.0;

  for (int object = 0; object < palette.object_count(); ++object) {
    const TokenId token = object + 1;
    const ObjectType type = *palette.type_of(token);
    if (!prompt->requires_type(type)) {
      logits(token) = std::log(params_.alpha_spurious);
      continue;
    }
    double need;
    if (const Directive* d = prompt->directive_for(type, row)) {
      int drawn = 0;
      for (int r = d->row_start; r <= row; ++r) drawn += state.count(r, object);
      need = *d->quota(type) - drawn;
    } else {
      double recalled = 0.0;
      for (int r = 0; r <= row; ++r) {
        recalled += state.count(r, object) * retention_[static_cast<size_t>(row - r)];
      }
      need = prompt->total(type) - recalled;
    }
    logits(token) = safe_log(params_.alpha * std::max(0.0, need) * eager);
  }
  return logits;
}

}  // namespace gridar
