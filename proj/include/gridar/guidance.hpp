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

// Classifier-free guidance in logit space.
//
// All combinators accept any Eigen column-vector expression and return a
// dense vector of the same scalar type. -infinity entries are zero-weight
// sentinels: a -infinity conditional stays -infinity, offsets are formed on
// logits clamped to `floor`, and any combined entry at or below `floor`
// becomes -infinity again.

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "gridar/errors.hpp"

namespace gridar {

enum class GuidanceMode { two_way, three_way, replacement };

std::string to_string(GuidanceMode mode);
GuidanceMode parse_guidance_mode(const std::string& name);

struct GuidanceConfig {
  GuidanceMode mode = GuidanceMode::three_way;
  double s_o = 5.0;  ///< original-prompt scale (ignored in replacement mode)
  double s_r = 5.0;  ///< reformulated-prompt scale (ignored in two-way mode)
  double eps_parallel = 1e-12;
  double floor = -1e4;
};

template <typename Scalar>
using GuidanceVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace guidance_detail {

template <typename A, typename B>
void check_lengths(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size()) {
    throw LengthMismatch("logit vectors differ in length: " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  }
}

template <typename Scalar>
void restore_sentinels(GuidanceVector<Scalar>& out, Scalar floor) {
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (!(out(i) > floor)) out(i) = -std::numeric_limits<Scalar>::infinity();
  }
}

}  // namespace guidance_detail

/// Two-way CFG: l_cond + s * (l_cond - l_uncond).
template <typename DerivedC, typename DerivedU>
GuidanceVector<typename DerivedC::Scalar> cfg_combine(
    const Eigen::MatrixBase<DerivedC>& l_cond, const Eigen::MatrixBase<DerivedU>& l_uncond,
    typename DerivedC::Scalar s, typename DerivedC::Scalar floor = -1e4) {
  using Scalar = typename DerivedC::Scalar;
  guidance_detail::check_lengths(l_cond, l_uncond);
  const GuidanceVector<Scalar> cond = l_cond;
  const GuidanceVector<Scalar> uncond = l_uncond.cwiseMax(floor);
  const GuidanceVector<Scalar> offset = cond - uncond;
  GuidanceVector<Scalar> out = cond + s * offset;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (std::isinf(cond(i)) && cond(i) < 0) out(i) = cond(i);
  }
  guidance_detail::restore_sentinels(out, floor);
  return out;
}

/// d_r minus its projection on d_o. Returns d_r unchanged when
/// ||d_o||^2 < eps_parallel.
template <typename DerivedR, typename DerivedO>
GuidanceVector<typename DerivedR::Scalar> orthogonal_reject(
    const Eigen::MatrixBase<DerivedR>& d_r, const Eigen::MatrixBase<DerivedO>& d_o,
    typename DerivedR::Scalar eps_parallel = 1e-12) {
  using Scalar = typename DerivedR::Scalar;
  guidance_detail::check_lengths(d_r, d_o);
  const GuidanceVector<Scalar> r = d_r;
  const GuidanceVector<Scalar> o = d_o;
  const Scalar norm2 = o.dot(o);
  if (norm2 < eps_parallel) return r;
  const Scalar coef = r.dot(o) / norm2;
  return r - coef * o;
}

/// Three-way CFG: l_o + s_o * d_o + s_r * reject(d_r, d_o), where
/// d_o = l_o - l_u and d_r = l_r - l_u. Terms are summed in that order.
template <typename DerivedU, typename DerivedO, typename DerivedR>
GuidanceVector<typename DerivedO::Scalar> three_way_combine(
    const Eigen::MatrixBase<DerivedU>& l_u, const Eigen::MatrixBase<DerivedO>& l_o,
    const Eigen::MatrixBase<DerivedR>& l_r, const GuidanceConfig& cfg) {
  using Scalar = typename DerivedO::Scalar;
  guidance_detail::check_lengths(l_o, l_u);
  guidance_detail::check_lengths(l_o, l_r);
  const Scalar floor = static_cast<Scalar>(cfg.floor);
  const GuidanceVector<Scalar> u = l_u.cwiseMax(floor);
  const GuidanceVector<Scalar> o = l_o.cwiseMax(floor);
  const GuidanceVector<Scalar> r = l_r.cwiseMax(floor);
  const GuidanceVector<Scalar> d_o = o - u;
  const GuidanceVector<Scalar> d_r = r - u;
  const GuidanceVector<Scalar> d_r_perp =
      orthogonal_reject(d_r, d_o, static_cast<Scalar>(cfg.eps_parallel));
  const GuidanceVector<Scalar> base = o + static_cast<Scalar>(cfg.s_o) * d_o;
  GuidanceVector<Scalar> out = base + static_cast<Scalar>(cfg.s_r) * d_r_perp;
  guidance_detail::restore_sentinels(out, floor);
  return out;
}

/// Prompt replacement: standard CFG with the reformulated prompt as the
/// condition.
template <typename DerivedU, typename DerivedR>
GuidanceVector<typename DerivedR::Scalar> replacement_combine(
    const Eigen::MatrixBase<DerivedU>& l_u, const Eigen::MatrixBase<DerivedR>& l_r,
    typename DerivedR::Scalar s_r, typename DerivedR::Scalar floor = -1e4) {
  return cfg_combine(l_r, l_u, s_r, floor);
}

/// Picks the combinator for `cfg.mode`. Without a reformulated branch every
/// mode falls back to two-way CFG on the original prompt.
template <typename Scalar>
GuidanceVector<Scalar> guide(const GuidanceConfig& cfg, const GuidanceVector<Scalar>& l_u,
                             const GuidanceVector<Scalar>& l_o,
                             const GuidanceVector<Scalar>* l_r) {
  const auto floor = static_cast<Scalar>(cfg.floor);
  switch (cfg.mode) {
    case GuidanceMode::two_way:
      return cfg_combine(l_o, l_u, static_cast<Scalar>(cfg.s_o), floor);
    case GuidanceMode::three_way:
      if (l_r) return three_way_combine(l_u, l_o, *l_r, cfg);
      return cfg_combine(l_o, l_u, static_cast<Scalar>(cfg.s_o), floor);
    case GuidanceMode::replacement:
      if (l_r) return replacement_combine(l_u, *l_r, static_cast<Scalar>(cfg.s_r), floor);
      return cfg_combine(l_o, l_u, static_cast<Scalar>(cfg.s_r), floor);
  }
  throw LengthMismatch("unknown guidance mode");
}

}  // namespace gridar
