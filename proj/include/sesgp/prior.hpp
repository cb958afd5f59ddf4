/*
 * Copyright 2026 The sesgp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>

#include "sesgp/eigenexpansion.hpp"

namespace sesgp {

/// Model-size prior q_n over {0, ..., d_n}.
struct SparsityPriorConfig {
  enum class Kind { cap, penalized };
  Kind kind = Kind::cap;
  /// Exponent scale of the penalized family d^{k loglog n - 1} exp(-d^{k loglog n}).
  double k = 1.0;
  int d_n = 1;
  int n = 3;
};

/// Law of A with A^d log^{d+1}(A) ~ Exp(rate), truncated to a > max(1/xi, 1).
struct RescalingPriorConfig {
  double rate = 1.0;
  double xi = 1.0;

  /// Left end of the support; the transform is increasing only for a > 1.
  double lower() const { return std::max(1.0 / xi, 1.0); }
};

struct PriorConfig {
  SparsityPriorConfig size;
  RescalingPriorConfig rescaling;
};

/// Normalized q_n(0..d_n), evaluated in log space.
Eigen::VectorXd size_prior_pmf(const SparsityPriorConfig& cfg);

/// log q_n(d) - log binom(d_n, d): log prior mass of one specific pattern of size d.
double log_pattern_prior(const Eigen::VectorXd& size_pmf, int d);

/// Size from `size_pmf`, then a uniform subset of that size among d_n coordinates.
SparsityPattern sample_gamma(const Eigen::VectorXd& size_pmf, int d_n, Rng& rng);
SparsityPattern sample_gamma(const SparsityPriorConfig& cfg, std::uint64_t seed);

/// a^d log^{d+1}(a) for a > 1.
double rescaling_transform(int d, double a);

/// Log density of the truncated rescaling law (Jacobian included); -inf at or below lower().
double rescaling_log_density(const RescalingPriorConfig& cfg, int d, double a);

/// Inverse-transform draw; the exponential variate is shifted past the truncation point.
double sample_rescaling(const RescalingPriorConfig& cfg, int d, Rng& rng);
double sample_rescaling(const RescalingPriorConfig& cfg, int d, std::uint64_t seed);

/// Solves a^d log^{d+1}(a) = value for a > 1.
double invert_rescaling_transform(int d, double value);

struct PriorDraw {
  SparsityPattern gamma;
  /// Absent for the empty pattern, whose prior is the constant N(0,1) function.
  std::optional<double> a;
  Series path;
};

/// Gamma -> A -> truncated Karhunen-Loeve path with `budget` terms.
PriorDraw sample_prior_function(const SparsityPriorConfig& size_cfg, const RescalingPriorConfig& rescaling_cfg,
                                const DesignSpec& design, int budget, std::uint64_t seed);

}  // namespace sesgp
