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

#include <cstdint>
#include <optional>
#include <span>
#include <variant>

#include "sesgp/eigenexpansion.hpp"
#include "sesgp/rkhs.hpp"

namespace sesgp {

/// Monte Carlo estimate of P(||W - f||_{L2(Q)} < eps) for the truncated series.
struct SmallBallEstimate {
  double epsilon = 0;
  double probability = 0;
  double prob_std_err = 0;
  double neg_log_prob = 0;
  /// Standard error of neg_log_prob (delta method).
  double mc_std_err = 0;
  std::int64_t n_samples = 0;
  int truncation = 0;
  double tail_bound = 0;
  /// Shift in neg_log_prob the omitted tail can cause: twice max(tilt, 1/eps^2) times tail_bound.
  double tail_tolerance = 0;
  /// Exponential tilt of the sampler; 0 means plain Monte Carlo.
  double tilt = 0;
  /// No sample landed in the ball: probability is an upper confidence bound.
  bool censored = false;
};

/// P(sum_j (sqrt(mu_j) Z_j - f_j)^2 < eps^2), Z iid N(0,1).
///
/// When eps^2 >= E sum (sqrt(mu) Z - f)^2 the indicator is averaged directly and the
/// standard error is the z = 1 Wilson half-width. Otherwise Z_j is drawn from the
/// exponentially tilted law proportional to exp(-t (sqrt(mu_j) z - f_j)^2) phi(z),
/// with t chosen so that the tilted mean of the sum equals eps^2, and the indicator
/// is reweighted by the likelihood ratio.
SmallBallEstimate small_ball_probability(const Eigen::VectorXd& mu, const Eigen::VectorXd& shift, double epsilon,
                                         std::int64_t n_samples, std::uint64_t seed, double tail_bound = 0);

/// Requires spectrum.tail() <= eps^2 / 100.
SmallBallEstimate centered_small_ball(const Spectrum& spectrum, double epsilon, std::int64_t n_samples,
                                      std::uint64_t seed);
SmallBallEstimate shifted_small_ball(const Spectrum& spectrum, const Series& target, double epsilon,
                                     std::int64_t n_samples, std::uint64_t seed);

/// Truncation meeting the small-ball rule tail <= eps^2 / 100.
int small_ball_truncation(int gamma_size, const Constants& c, double epsilon);

/// Bounds on the centered exponent -log P(||W|| < eps).
struct ExponentBounds {
  double lower = 0;
  double upper = 0;
};

/// lower = C' a^g log(1/eps)^g / g!,  upper = C a^g log(a/eps)^{g+1} / g!.
std::variant<ExponentBounds, HypothesisReport> centered_exponent_bounds(const Ellipsoid& ell, double epsilon,
                                                                       const BoundConstants& constants = {});

struct CalibrationPoint {
  double a = 0;
  int gamma_size = 1;
  double epsilon = 0;
  double neg_log_prob = 0;
};

/// Smallest C' and largest C that bracket every pilot point, widened by `margin`.
BoundConstants calibrate_exponent_constants(std::span<const CalibrationPoint> pilot, double margin = 2.0);

struct ConcentrationValue {
  double epsilon = 0;
  double decentering = 0;
  double centered_exponent = 0;
  double phi = 0;
  SmallBallEstimate centered;
  std::optional<ExponentBounds> bounds;
};

struct McOptions {
  std::int64_t n_samples = 1'000'000;
  std::uint64_t seed = 1;
};

/// Exact decentering plus the Monte Carlo centered exponent.
ConcentrationValue concentration(const Ellipsoid& ell, const Series& target, double epsilon,
                                 const McOptions& mc = {}, const BoundConstants& constants = {});

}  // namespace sesgp
