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

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <span>

#include "gridar/canvas.hpp"
#include "gridar/prompt.hpp"
#include "gridar/rng.hpp"

namespace gridar {

/// Next-token logits over the codebook. -infinity marks a zero-weight token.
using Logits = Eigen::VectorXd;

enum class ConditionKind { unconditional, original, reformulated };

/// The prompt variant a session is conditioned on. `prompt` is null for the
/// unconditional (null-text) branch.
struct Condition {
  ConditionKind kind = ConditionKind::unconditional;
  std::shared_ptr<const ScenePrompt> prompt;
};

/// Unconditional, original and (once produced) reformulated conditions.
struct PromptBundle {
  std::shared_ptr<const ScenePrompt> original;
  std::shared_ptr<const ScenePrompt> reformulated;

  explicit PromptBundle(ScenePrompt prompt)
      : original(std::make_shared<const ScenePrompt>(std::move(prompt))) {}

  PromptBundle with_reformulation(ScenePrompt r) const {
    PromptBundle b = *this;
    b.reformulated = std::make_shared<const ScenePrompt>(std::move(r));
    return b;
  }

  Condition unconditional() const { return {ConditionKind::unconditional, nullptr}; }
  Condition original_condition() const { return {ConditionKind::original, original}; }
  Condition reformulated_condition() const {
    return {ConditionKind::reformulated, reformulated};
  }
};

/// Model-specific incremental state for a prefix (the "KV cache").
class SessionState {
 public:
  virtual ~SessionState() = default;
  virtual std::unique_ptr<SessionState> clone() const = 0;
  virtual void append(TokenId token, int position) = 0;
};

/// A decoding session: a condition plus the prefix consumed so far. Copying
/// a session forks it; both copies evolve independently.
class ModelSession {
 public:
  ModelSession(Condition condition, std::unique_ptr<SessionState> state)
      : condition_(std::move(condition)), state_(std::move(state)) {}

  ModelSession(const ModelSession& other)
      : condition_(other.condition_),
        prefix_(other.prefix_),
        state_(other.state_ ? other.state_->clone() : nullptr) {}
  ModelSession& operator=(const ModelSession& other) {
    if (this != &other) *this = ModelSession(other);
    return *this;
  }
  ModelSession(ModelSession&&) noexcept = default;
  ModelSession& operator=(ModelSession&&) noexcept = default;

  const Condition& condition() const { return condition_; }
  std::span<const TokenId> prefix() const { return prefix_; }
  int length() const { return static_cast<int>(prefix_.size()); }
  const SessionState* cache() const { return state_.get(); }

  void append(TokenId token) {
    if (state_) state_->append(token, length());
    prefix_.push_back(token);
  }
  void extend(std::span<const TokenId> tokens) {
    for (TokenId t : tokens) append(t);
  }

 private:
  Condition condition_;
  TokenSequence prefix_;
  std::unique_ptr<SessionState> state_;
};

/// A raster-scan autoregressive image-token model.
class ArModel {
 public:
  virtual ~ArModel() = default;

  virtual const CanvasSpec& spec() const = 0;
  virtual ModelSession open(Condition condition) const = 0;
  /// Logits for the token at `position`, which must equal the session length.
  virtual Logits next_logits(const ModelSession& session, int position) const = 0;
  virtual double temperature() const { return 1.0; }
};

/// Draws a token from softmax(logits / temperature).
TokenId sample_token(const Logits& logits, double temperature, Rng& rng);

/// softmax with -infinity entries mapped to probability 0.
Eigen::VectorXd softmax(const Logits& logits);

}  // namespace gridar
