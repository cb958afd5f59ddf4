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

#include <cmath>
#include <memory>
#include <variant>

#include "sesgp/common.hpp"
#include "sesgp/eigenexpansion.hpp"

namespace sesgp {

/// Principal branch of the Lambert W function on [0, inf): W(y) e^{W(y)} = y.
///
/// Halley iteration started from log1p(y) below e and from log y - log log y above.
template <typename Scalar = double>
Scalar lambert_w(Scalar y) {
  if (std::isnan(y) || y < 0) throw DomainError("lambert_w: only the principal branch on y >= 0 is supported");
  if (y == 0) return 0;
  if (std::isinf(y)) return y;
  const Scalar e = std::exp(Scalar(1));
  Scalar w = y < e ? std::log1p(y) : std::log(y) - std::log(std::log(y));
  if (y < e && w > 0) w *= Scalar(0.75);
  for (int it = 0; it < 64; ++it) {
    const Scalar ew = std::exp(w);
    const Scalar f = w * ew - y;
    const Scalar denom = ew * (w + 1) - (w + 2) * f / (2 * w + 2);
    const Scalar step = f / denom;
    w -= step;
    if (std::abs(step) <= 4 * std::numeric_limits<Scalar>::epsilon() * (1 + std::abs(w))) break;
  }
  return w;
}

/// Sobolev order beta with regularity cap alpha for a d0-variate truth.
struct SmoothnessSpec {
  double beta = 1.0;
  double alpha = 1.4;
  int d0 = 2;

  enum class Bound { strict, closed };

  /// beta > d0/2 (beta >= d0/2 when `lower` is closed) and beta < alpha < beta (1 + 1/d0).
  static SmoothnessSpec make(double beta, double alpha, int d0, Bound lower = Bound::strict);
};

/// The RKHS unit ball as the ellipsoid { theta : sum theta_j^2 / mu_j <= 1 }.
class Ellipsoid {
 public:
  Ellipsoid(std::shared_ptr<const Spectrum> spectrum, int truncation);
  explicit Ellipsoid(std::shared_ptr<const Spectrum> spectrum)
      : Ellipsoid(spectrum, spectrum ? spectrum->size() : 0) {}

  const Spectrum& spectrum() const { return *spectrum_; }
  std::shared_ptr<const Spectrum> spectrum_ptr() const { return spectrum_; }
  int truncation() const { return truncation_; }
  Eigen::VectorXd axes() const { return spectrum_->eigenvalues().head(truncation_); }

 private:
  std::shared_ptr<const Spectrum> spectrum_;
  int truncation_;
};

/// Volume-argument bounds on log N(eps, unit ball, L2).
struct EntropyEstimate {
  double epsilon = 0;
  double m_star = 0;
  long long tau = 0;
  double log_upper = 0;
  double log_lower = 0;
};

/// Constant in the entropy hypotheses eps^{-2} >= C_H (a xi)^{|gamma|}.
inline constexpr double kEntropyConstant = 1.0;

std::variant<EntropyEstimate, HypothesisReport> entropy_bounds(const Ellipsoid& ell, double epsilon);

struct DecenteringResult {
  double epsilon = 0;
  double inf_sq_norm = 0;
  double multiplier = 0;
  Eigen::VectorXd coeffs;
};

/// min sum theta_j^2 / mu_j  subject to  sum (theta_j - f_j)^2 <= eps^2.
///
/// theta_j = f_j mu_j / (mu_j + nu) with nu the root of the active constraint.
/// Coefficients of `target` beyond `axes` are treated as an unmatched residual.
DecenteringResult decentering(const Eigen::VectorXd& axes, const Eigen::VectorXd& target, double epsilon);
DecenteringResult decentering(const Ellipsoid& ell, const Series& target, double epsilon);

/// Existential constants of the decentering bounds.
struct BoundConstants {
  double c = 1.0;
  double c_prime = 1.0;
};

/// A bound reported as its natural logarithm with the Fourier cutoff used.
struct LogBound {
  double log_value = 0;
  double fourier_cutoff = 0;
};

/// Bounds below are stated for eps < kDecenteringEpsilon0.
inline constexpr double kDecenteringEpsilon0 = 1.0;

/// log of  C (2 sqrt(pi))^{d0} a^{d0} exp(C eps^{-2/beta} / a^2)  with C = sobolev_norm^2.
LogBound decentering_upper_bound(double a, const SmoothnessSpec& spec, double sobolev_norm, double epsilon);

/// log of  C eps^2 (xi a / sqrt 2)^{|gamma|} exp(C' eps^{-2/alpha} min(xi^2, a^{-2})).
LogBound decentering_lower_bound(double a, int gamma_size, const SmoothnessSpec& spec, double xi, double epsilon,
                                 const BoundConstants& constants = {});

}  // namespace sesgp
