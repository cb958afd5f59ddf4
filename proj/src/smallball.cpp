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

#include "sesgp/smallball.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <vector>

namespace sesgp {
namespace {

struct BlockStats {
  double weight_sum = 0;
  double weight_sq_sum = 0;
  std::int64_t hits = 0;
};

constexpr std::int64_t kBlockSize = 1 << 14;

// Tilted mean of sum (sqrt(mu) Z - f)^2, decreasing in t.
double tilted_mean(const Eigen::ArrayXd& mu, const Eigen::ArrayXd& f2, double t) {
  const Eigen::ArrayXd d = 1.0 + 2.0 * t * mu;
  return (mu / d + f2 / d.square()).sum();
}

double solve_tilt(const Eigen::ArrayXd& mu, const Eigen::ArrayXd& f2, double target) {
  double lo = 0;
  double hi = 1;
  while (tilted_mean(mu, f2, hi) > target) {
    lo = hi;
    hi *= 2;
    if (hi > 1e300) throw NumericalError("small_ball_probability: tilt search diverged");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (tilted_mean(mu, f2, mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

SmallBallEstimate small_ball_probability(const Eigen::VectorXd& mu, const Eigen::VectorXd& shift, double epsilon,
                                         std::int64_t n_samples, std::uint64_t seed, double tail_bound) {
  if (!(epsilon > 0)) throw DomainError("small_ball_probability: epsilon must be positive");
  if (n_samples < 1) throw DomainError("small_ball_probability: need at least one sample");
  if (mu.size() < 1 || shift.size() != mu.size())
    throw DomainError("small_ball_probability: eigenvalues and shift must be non-empty and aligned");

  const Eigen::ArrayXd m = mu.array();
  const Eigen::ArrayXd f = shift.array();
  const Eigen::ArrayXd f2 = f.square();
  const double eps2 = epsilon * epsilon;
  const double mean = tilted_mean(m, f2, 0.0);
  const double t = eps2 < mean ? solve_tilt(m, f2, eps2) : 0.0;

  // Tilted law of Z_j: N(loc_j, scale_j^2); log weight = t S - log_norm.
  const Eigen::ArrayXd d = 1.0 + 2.0 * t * m;
  const Eigen::ArrayXd scale = d.rsqrt();
  const Eigen::ArrayXd loc = 2.0 * t * m.sqrt() * f / d;
  const Eigen::ArrayXd root_mu = m.sqrt();
  const double log_norm = (0.5 * d.log() + t * f2 / d).sum();

  const std::int64_t n_blocks = (n_samples + kBlockSize - 1) / kBlockSize;
  auto run_block = [&](std::int64_t b) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(b));
    std::normal_distribution<double> normal;
    const std::int64_t begin = b * kBlockSize;
    const std::int64_t end = std::min(n_samples, begin + kBlockSize);
    BlockStats s;
    const Eigen::Index J = m.size();
    for (std::int64_t i = begin; i < end; ++i) {
      double sum = 0;
      for (Eigen::Index j = 0; j < J; ++j) {
        const double z = loc[j] + scale[j] * normal(rng);
        const double r = root_mu[j] * z - f[j];
        sum += r * r;
      }
      if (sum < eps2) {
        const double w = t > 0 ? std::exp(t * sum - log_norm) : 1.0;
        s.weight_sum += w;
        s.weight_sq_sum += w * w;
        ++s.hits;
      }
    }
    return s;
  };

  std::vector<BlockStats> stats(static_cast<std::size_t>(n_blocks));
  const int workers = std::min<std::int64_t>(worker_count(), n_blocks);
  if (workers <= 1) {
    for (std::int64_t b = 0; b < n_blocks; ++b) stats[static_cast<std::size_t>(b)] = run_block(b);
  } else {
    std::vector<std::future<void>> jobs;
    for (int w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::int64_t b = w; b < n_blocks; b += workers) stats[static_cast<std::size_t>(b)] = run_block(b);
      }));
    }
    for (auto& j : jobs) j.get();
  }
  BlockStats total;
  for (const auto& s : stats) {
    total.weight_sum += s.weight_sum;
    total.weight_sq_sum += s.weight_sq_sum;
    total.hits += s.hits;
  }

  SmallBallEstimate est;
  est.epsilon = epsilon;
  est.n_samples = n_samples;
  est.truncation = static_cast<int>(mu.size());
  est.tail_bound = tail_bound;
  est.tilt = t;
  // d(-log P)/d(eps^2) is about t under the tilted law; the omitted terms add tail_bound in mean.
  est.tail_tolerance = 2 * std::max(t, 1 / (epsilon * epsilon)) * tail_bound;
  const double n = static_cast<double>(n_samples);
  if (total.hits == 0) {
    // Wilson upper bound at z = 3 on the hit frequency, times the largest possible weight.
    constexpr double z2 = 9.0;
    const double upper = (z2 / n) / (1.0 + z2 / n);
    est.censored = true;
    est.probability = std::min(1.0, upper * (t > 0 ? std::exp(t * eps2 - log_norm) : 1.0));
    est.prob_std_err = 0;
    est.neg_log_prob = std::max(0.0, -std::log(est.probability));
    est.mc_std_err = 0;
    return est;
  }
  const double p = total.weight_sum / n;
  double se;
  if (t > 0) {
    const double var = std::max(0.0, total.weight_sq_sum / n - p * p);
    se = std::sqrt(var / std::max(1.0, n - 1));
  } else {
    se = std::sqrt(p * (1 - p) / n + 1.0 / (4 * n * n)) / (1.0 + 1.0 / n);
  }
  est.probability = p;
  est.prob_std_err = se;
  est.neg_log_prob = std::max(0.0, -std::log(p));
  est.mc_std_err = se / p;
  return est;
}

int small_ball_truncation(int gamma_size, const Constants& c, double epsilon) {
  return truncation_for_tail(gamma_size, c, epsilon * epsilon / 100.0);
}

namespace {
void check_truncation(const Spectrum& spectrum, double epsilon) {
  if (spectrum.tail() > epsilon * epsilon / 100.0)
    throw DomainError("small ball: truncation tail exceeds eps^2/100; enlarge the spectrum budget");
}
}  // namespace

SmallBallEstimate centered_small_ball(const Spectrum& spectrum, double epsilon, std::int64_t n_samples,
                                      std::uint64_t seed) {
  check_truncation(spectrum, epsilon);
  const Eigen::VectorXd mu = spectrum.eigenvalues();
  return small_ball_probability(mu, Eigen::VectorXd::Zero(mu.size()), epsilon, n_samples, seed, spectrum.tail());
}

SmallBallEstimate shifted_small_ball(const Spectrum& spectrum, const Series& target, double epsilon,
                                     std::int64_t n_samples, std::uint64_t seed) {
  check_truncation(spectrum, epsilon);
  if (target.truncation() > spectrum.size())
    throw DomainError("shifted_small_ball: target has more coefficients than the spectrum");
  const Eigen::VectorXd mu = spectrum.eigenvalues();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(mu.size());
  f.head(target.truncation()) = target.coeffs;
  return small_ball_probability(mu, f, epsilon, n_samples, seed, spectrum.tail());
}

namespace {

double lower_shape(double a, int g, double epsilon) {
  return std::pow(a, g) * std::pow(-std::log(epsilon), g) / std::tgamma(g + 1.0);
}

double upper_shape(double a, int g, double epsilon) {
  return std::pow(a, g) * std::pow(std::log(a / epsilon), g + 1) / std::tgamma(g + 1.0);
}

}  // namespace

std::variant<ExponentBounds, HypothesisReport> centered_exponent_bounds(const Ellipsoid& ell, double epsilon,
                                                                       const BoundConstants& constants) {
  const auto& c = ell.spectrum().constants();
  const int g = ell.spectrum().gamma().cardinality();
  if (g < 1) return HypothesisReport{"empty pattern"};
  if (!(epsilon > 0 && epsilon < 1)) return HypothesisReport{"epsilon must lie in (0, 1)"};
  const double a_xi = c.a * c.xi;
  if (!(std::pow(epsilon, -2.0) >= kEntropyConstant * std::pow(a_xi, g)))
    return HypothesisReport{"eps^-2 < C_H (a xi)^|gamma|"};
  if (!(a_xi * -std::log(epsilon) > g)) return HypothesisReport{"a xi log(1/eps) <= |gamma|"};
  return ExponentBounds{constants.c_prime * lower_shape(c.a, g, epsilon), constants.c * upper_shape(c.a, g, epsilon)};
}

BoundConstants calibrate_exponent_constants(std::span<const CalibrationPoint> pilot, double margin) {
  if (pilot.empty()) throw DomainError("calibrate_exponent_constants: empty pilot grid");
  if (!(margin >= 1)) throw DomainError("calibrate_exponent_constants: margin must be >= 1");
  double c_prime = std::numeric_limits<double>::infinity();
  double c = 0;
  for (const auto& p : pilot) {
    c_prime = std::min(c_prime, p.neg_log_prob / lower_shape(p.a, p.gamma_size, p.epsilon));
    c = std::max(c, p.neg_log_prob / upper_shape(p.a, p.gamma_size, p.epsilon));
  }
  return {c * margin, c_prime / margin};
}

ConcentrationValue concentration(const Ellipsoid& ell, const Series& target, double epsilon, const McOptions& mc,
                                 const BoundConstants& constants) {
  ConcentrationValue out;
  out.epsilon = epsilon;
  out.decentering = decentering(ell, target, epsilon).inf_sq_norm;
  out.centered = centered_small_ball(ell.spectrum(), epsilon, mc.n_samples, mc.seed);
  out.centered_exponent = out.centered.neg_log_prob;
  out.phi = out.decentering + out.centered_exponent;
  auto bounds = centered_exponent_bounds(ell, epsilon, constants);
  if (auto* b = std::get_if<ExponentBounds>(&bounds)) out.bounds = *b;
  return out;
}

}  // namespace sesgp
