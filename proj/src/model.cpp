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

#include "gridar/model.hpp"

#include <cmath>
#include <limits>

#include "gridar/errors.hpp"

namespace gridar {

Eigen::VectorXd softmax(const Logits& logits) {
  const double top = logits.maxCoeff();
  if (!std::isfinite(top)) {
    throw DegenerateDistribution("no finite logit to normalize");
  }
  Eigen::VectorXd p = (logits.array() - top).exp().matrix();
  return p / p.sum();
}

TokenId sample_token(const Logits& logits, double temperature, Rng& rng) {
  if (!(temperature > 0.0)) throw DegenerateDistribution("temperature must be positive");
  if (logits.size() == 0) throw DegenerateDistribution("empty logits");
  const double top = logits.maxCoeff();
  if (!std::isfinite(top)) {
    throw DegenerateDistribution("all logits are -infinity");
  }
  Eigen::VectorXd weights = ((logits.array() - top) / temperature).exp().matrix();
  const double u = rng.uniform() * weights.sum();
  double acc = 0.0;
  TokenId last_positive = 0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights(i) <= 0.0) continue;
    acc += weights(i);
    last_positive = static_cast<TokenId>(i);
    if (u < acc) return last_positive;
  }
  return last_positive;
}

}  // namespace gridar
