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

#include "sesgp/rkhs.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>

namespace sesgp {

SmoothnessSpec SmoothnessSpec::make(double beta, double alpha, int d0, Bound lower) {
  if (d0 < 1) throw DomainError("SmoothnessSpec: d0 must be >= 1");
  if (lower == Bound::strict && !(beta > d0 / 2.0)) throw DomainError("SmoothnessSpec: beta must exceed d0/2");
  if (lower == Bound::closed && !(beta >= d0 / 2.0)) throw DomainError("SmoothnessSpec: beta must be at least d0/2");
  if (!(alpha > beta && alpha < beta * (1.0 + 1.0 / d0)))
    throw DomainError("SmoothnessSpec: alpha must lie in (beta, beta(1 + 1/d0))");
  return {beta, alpha, d0};
}

Ellipsoid::Ellipsoid(std::shared_ptr<const Spectrum> spectrum, int truncation)
    : spectrum_(std::move(spectrum)), truncation_(truncation) {
  if (!spectrum_) throw DomainError("Ellipsoid: null spectrum");
  if (truncation_ < 1 || truncation_ > spectrum_->size())
    throw DomainError("Ellipsoid: truncation outside [1, spectrum size]");
  for (int j = 0; j < truncation_; ++j) {
    if (!(spectrum_->eigenvalue(j) > 0)) throw DomainError("Ellipsoid: axes must be positive");
    if (j > 0 && spectrum_->eigenvalue(j) > spectrum_->eigenvalue(j - 1))
      throw DomainError("Ellipsoid: axes must be weakly decreasing");
  }
}

std::variant<EntropyEstimate, HypothesisReport> entropy_bounds(const Ellipsoid& ell, double epsilon) {
  const auto& c = ell.spectrum().constants();
  const int g = ell.spectrum().gamma().cardinality();
  if (g < 1) return HypothesisReport{"empty pattern"};
  if (!(epsilon > 0 && epsilon < 1)) return HypothesisReport{"epsilon must lie in (0, 1)"};
  const double log_inv_eps = -std::log(epsilon);
  const double a_xi = c.a * c.xi;
  if (!(std::pow(epsilon, -2.0) >= kEntropyConstant * std::pow(a_xi, g))) {
    std::ostringstream msg;
    msg << "eps^-2 = " << std::pow(epsilon, -2.0) << " < C_H (a xi)^|gamma| = " << std::pow(a_xi, g);
    return HypothesisReport{msg.str()};
  }
  if (!(a_xi * log_inv_eps > g)) {
    std::ostringstream msg;
    msg << "a xi log(1/eps) = " << a_xi * log_inv_eps << " <= |gamma| = " << g;
    return HypothesisReport{msg.str()};
  }
  const double log_v_ratio = std::log(c.V / (2 * c.v1));
  const double ratio = (log_inv_eps - 0.25 * g * log_v_ratio) / log_inv_eps;
  if (ratio < 0.5 || ratio > 2.0) {
    std::ostringstream msg;
    msg << "(log(1/eps) - |gamma|/4 log(V/2v1)) / log(1/eps) = " << ratio << " outside [0.5, 2]";
    return HypothesisReport{msg.str()};
  }
  const double log_inv_b = -std::log(c.B);
  const double m_star = (2 * log_inv_eps - 0.5 * g * log_v_ratio) / log_inv_b;
  if (!(m_star > 0)) return HypothesisReport{"m* <= 0"};

  const int floor_m = static_cast<int>(std::floor(m_star));
  const double tau = detail::binomial(floor_m + g, g);
  if (tau > 9e15) return HypothesisReport{"tau exceeds integer range"};

  // Degrees 0..floor_m hold exactly tau eigenvalues; index tau is the first of degree floor_m + 1.
  const double log_mu0 = 0.5 * g * std::log(2 * c.v1 / c.V);
  double sum_log_mu = 0;
  for (int m = 0; m <= floor_m; ++m) sum_log_mu += detail::binomial(g + m - 1, m) * (log_mu0 - m * log_inv_b);
  sum_log_mu += log_mu0 - (floor_m + 1) * log_inv_b;

  EntropyEstimate est;
  est.epsilon = epsilon;
  est.m_star = m_star;
  est.tau = static_cast<long long>(tau);
  const double n_axes = tau + 1;
  est.log_upper = 2 * n_axes * std::numbers::ln2 + n_axes * log_inv_eps + 0.5 * sum_log_mu;
  est.log_lower = n_axes * std::numbers::ln2;
  return est;
}

DecenteringResult decentering(const Eigen::VectorXd& axes, const Eigen::VectorXd& target, double epsilon) {
  if (!(epsilon > 0)) throw DomainError("decentering: epsilon must be positive");
  if ((axes.array() <= 0).any()) throw DomainError("decentering: axes must be positive");
  const Eigen::Index n = std::min(axes.size(), target.size());
  const Eigen::VectorXd mu = axes.head(n);
  const Eigen::VectorXd f = target.head(n);
  const double residual = target.size() > n ? target.tail(target.size() - n).squaredNorm() : 0.0;
  const double budget = epsilon * epsilon - residual;
  if (budget <= 0) throw DomainError("decentering: target tail beyond the ellipsoid exceeds epsilon");

  DecenteringResult out;
  out.epsilon = epsilon;
  const double f_sq = f.squaredNorm();
  if (f_sq <= budget) {
    out.coeffs = Eigen::VectorXd::Zero(n);
    return out;
  }

  const Eigen::ArrayXd f2 = f.array().square();
  auto constraint = [&](double nu) { return (f2 * (nu / (mu.array() + nu)).square()).sum(); };
  auto slope = [&](double nu) { return (2.0 * f2 * nu * mu.array() / (mu.array() + nu).cube()).sum(); };

  double lo = 0;
  const double r = std::sqrt(budget / f_sq);
  double hi = mu.maxCoeff() * r / (1 - r);
  while (constraint(hi) < budget) hi *= 2;
  double nu = 0.5 * (lo + hi);
  bool converged = false;
  for (int it = 0; it < 200; ++it) {
    const double g = constraint(nu) - budget;
    if (std::abs(g) <= 1e-15 * budget) {
      converged = true;
      break;
    }
    if (g > 0) {
      hi = nu;
    } else {
      lo = nu;
    }
    if (hi - lo <= 1e-16 * hi) {
      converged = true;
      break;
    }
    const double d = slope(nu);
    double next = d > 0 ? nu - g / d : lo - 1;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    nu = next;
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "decentering: multiplier root-find did not converge, bracket [" << lo << ", " << hi << "]";
    throw NumericalError(msg.str());
  }
  out.multiplier = nu;
  out.coeffs = (f.array() * mu.array() / (mu.array() + nu)).matrix();
  out.inf_sq_norm = (out.coeffs.array().square() / mu.array()).sum();
  return out;
}

DecenteringResult decentering(const Ellipsoid& ell, const Series& target, double epsilon) {
  return decentering(ell.axes(), target.coeffs, epsilon);
}

LogBound decentering_upper_bound(double a, const SmoothnessSpec& spec, double sobolev_norm, double epsilon) {
  if (!(a > 0) || !(sobolev_norm > 0)) throw DomainError("decentering_upper_bound: a and norm must be positive");
  if (!(epsilon > 0 && epsilon < kDecenteringEpsilon0))
    throw DomainError("decentering_upper_bound: epsilon must lie in (0, eps0)");
  const double c = sobolev_norm * sobolev_norm;
  const double d0 = spec.d0;
  LogBound out;
  out.log_value = std::log(c) + d0 * std::log(2 * std::sqrt(std::numbers::pi)) + d0 * std::log(a) +
                  c * std::pow(epsilon, -2.0 / spec.beta) / (a * a);
  out.fourier_cutoff = std::pow(epsilon, -1.0 / spec.beta);
  return out;
}

LogBound decentering_lower_bound(double a, int gamma_size, const SmoothnessSpec& spec, double xi, double epsilon,
                                 const BoundConstants& constants) {
  if (!(a > 0) || !(xi > 0)) throw DomainError("decentering_lower_bound: a and xi must be positive");
  if (gamma_size <= spec.d0) throw DomainError("decentering_lower_bound: pattern must strictly exceed d0");
  if (!(epsilon > 0 && epsilon < kDecenteringEpsilon0))
    throw DomainError("decentering_lower_bound: epsilon must lie in (0, eps0)");
  LogBound out;
  out.log_value = std::log(constants.c) + 2 * std::log(epsilon) + gamma_size * std::log(xi * a / std::sqrt(2.0)) +
                  constants.c_prime * std::pow(epsilon, -2.0 / spec.alpha) * std::min(xi * xi, 1.0 / (a * a));
  out.fourier_cutoff = std::pow(epsilon, -1.0 / spec.alpha);
  return out;
}

}  // namespace sesgp
