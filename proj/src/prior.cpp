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

#include "sesgp/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sesgp {

Eigen::VectorXd size_prior_pmf(const SparsityPriorConfig& cfg) {
  if (cfg.d_n < 1) throw DomainError("size_prior_pmf: d_n must be >= 1");
  if (cfg.n < 3) throw DomainError("size_prior_pmf: n must be >= 3 so that log log n > 0");
  const double loglog = std::log(std::log(static_cast<double>(cfg.n)));
  const double neg_inf = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd logq(cfg.d_n + 1);
  if (cfg.kind == SparsityPriorConfig::Kind::cap) {
    const double cap = std::pow(static_cast<double>(cfg.n), 1.0 / loglog);
    for (int d = 0; d <= cfg.d_n; ++d) logq[d] = d < cap ? 0.0 : neg_inf;
  } else {
    if (!(cfg.k > 0)) throw DomainError("size_prior_pmf: penalized k must be positive");
    const double e = cfg.k * loglog;
    if (e < 1) throw DomainError("size_prior_pmf: k log log n must be >= 1 (q(0) would be infinite)");
    logq[0] = e == 1 ? 0.0 : neg_inf;
    for (int d = 1; d <= cfg.d_n; ++d) logq[d] = (e - 1) * std::log(d) - std::pow(d, e);
  }
  const double mx = logq.maxCoeff();
  // Scalar exp: the vectorized one maps -inf to a denormal rather than zero.
  Eigen::VectorXd q = (logq.array() - mx).unaryExpr([](double v) { return std::exp(v); }).matrix();
  q /= q.sum();
  if (!(q[cfg.d_n] < 1)) throw DomainError("size_prior_pmf: all mass on d_n");
  return q;
}

double log_pattern_prior(const Eigen::VectorXd& size_pmf, int d) {
  const int d_n = static_cast<int>(size_pmf.size()) - 1;
  if (d < 0 || d > d_n) return -std::numeric_limits<double>::infinity();
  const double log_binom = std::lgamma(d_n + 1.0) - std::lgamma(d + 1.0) - std::lgamma(d_n - d + 1.0);
  return std::log(size_pmf[d]) - log_binom;
}

SparsityPattern sample_gamma(const Eigen::VectorXd& size_pmf, int d_n, Rng& rng) {
  if (size_pmf.size() != d_n + 1) throw DomainError("sample_gamma: pmf length must be d_n + 1");
  std::discrete_distribution<int> size_dist(size_pmf.data(), size_pmf.data() + size_pmf.size());
  const int size = size_dist(rng);
  std::vector<int> coords(static_cast<std::size_t>(d_n));
  std::iota(coords.begin(), coords.end(), 0);
  for (int i = 0; i < size; ++i) {
    std::uniform_int_distribution<int> pick(i, d_n - 1);
    std::swap(coords[static_cast<std::size_t>(i)], coords[static_cast<std::size_t>(pick(rng))]);
  }
  return SparsityPattern::from_indices(d_n, std::span<const int>(coords.data(), static_cast<std::size_t>(size)));
}

SparsityPattern sample_gamma(const SparsityPriorConfig& cfg, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return sample_gamma(size_prior_pmf(cfg), cfg.d_n, rng);
}

double rescaling_transform(int d, double a) {
  if (a <= 1) return 0.0;
  return std::exp(d * std::log(a) + (d + 1) * std::log(std::log(a)));
}

double rescaling_log_density(const RescalingPriorConfig& cfg, int d, double a) {
  if (d < 1) throw DomainError("rescaling_log_density: d must be >= 1");
  if (!(cfg.rate > 0)) throw DomainError("rescaling_log_density: rate must be positive");
  const double lower = cfg.lower();
  if (!(a > lower)) return -std::numeric_limits<double>::infinity();
  const double la = std::log(a);
  const double lla = std::log(la);
  // d/da a^d log^{d+1} a = a^{d-1} log^d(a) (d log a + d + 1)
  const double log_jacobian = (d - 1) * la + d * lla + std::log(d * la + d + 1);
  return std::log(cfg.rate) - cfg.rate * (rescaling_transform(d, a) - rescaling_transform(d, lower)) + log_jacobian;
}

double invert_rescaling_transform(int d, double value) {
  if (d < 1) throw DomainError("invert_rescaling_transform: d must be >= 1");
  if (!(value > 0)) throw DomainError("invert_rescaling_transform: value must be positive");
  // In u = log a > 0: d u + (d + 1) log u = log value, increasing in u.
  const double target = std::log(value);
  auto h = [&](double u) { return d * u + (d + 1) * std::log(u) - target; };
  double lo = 1e-300;
  double hi = 1.0;
  while (h(hi) < 0) {
    lo = hi;
    hi *= 2;
  }
  double u = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double hu = h(u);
    if (hu == 0) break;
    (hu > 0 ? hi : lo) = u;
    double next = u - hu / (d + (d + 1) / u);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - u) <= 1e-15 * u) {
      u = next;
      break;
    }
    u = next;
  }
  if (!std::isfinite(u) || u <= 0) throw NumericalError("invert_rescaling_transform: root-find failed");
  return std::exp(u);
}

double sample_rescaling(const RescalingPriorConfig& cfg, int d, Rng& rng) {
  if (d < 1) throw DomainError("sample_rescaling: d must be >= 1");
  const double lower = cfg.lower();
  const double t_lower = rescaling_transform(d, lower);
  std::exponential_distribution<double> expo(cfg.rate);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double a = invert_rescaling_transform(d, t_lower + expo(rng));
    if (a > lower) return a;
  }
  throw NumericalError("sample_rescaling: could not draw above the truncation point");
}

double sample_rescaling(const RescalingPriorConfig& cfg, int d, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return sample_rescaling(cfg, d, rng);
}

PriorDraw sample_prior_function(const SparsityPriorConfig& size_cfg, const RescalingPriorConfig& rescaling_cfg,
                                const DesignSpec& design, int budget, std::uint64_t seed) {
  if (size_cfg.d_n != design.dim) throw DomainError("sample_prior_function: d_n must equal the design dimension");
  Rng gamma_rng = make_rng(seed, 0);
  PriorDraw out;
  out.gamma = sample_gamma(size_prior_pmf(size_cfg), size_cfg.d_n, gamma_rng);
  if (out.gamma.empty()) {
    auto spectrum =
        std::make_shared<const Spectrum>(constant_spectrum(design.dim, compute_constants(design.xi, rescaling_cfg.lower())));
    out.path = sample_path(spectrum, seed ^ 0x9e3779b97f4a7c15ULL);
    return out;
  }
  Rng a_rng = make_rng(seed, 1);
  const double a = sample_rescaling(rescaling_cfg, out.gamma.cardinality(), a_rng);
  out.a = a;
  auto spectrum = std::make_shared<const Spectrum>(enumerate_spectrum(out.gamma, compute_constants(design.xi, a), budget));
  out.path = sample_path(spectrum, seed ^ 0x9e3779b97f4a7c15ULL);
  return out;
}

}  // namespace sesgp
