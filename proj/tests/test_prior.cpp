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

#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <map>

#include "oracles.hpp"
#include "sesgp/prior.hpp"

using namespace sesgp;
using doctest::Approx;

TEST_SUITE("prior") {

TEST_CASE("cap prior at n = 1000, d_n = 20 is uniform on the full range") {
  const auto q = size_prior_pmf({SparsityPriorConfig::Kind::cap, 1.0, 20, 1000});
  REQUIRE(q.size() == 21);
  for (int d = 0; d <= 20; ++d) CHECK(q[d] == Approx(1.0 / 21).epsilon(1e-14));
}

TEST_CASE("cap prior truncates above n^{1 / log log n}") {
  const auto q = size_prior_pmf({SparsityPriorConfig::Kind::cap, 1.0, 40, 1000});
  const double cap = std::pow(1000.0, 1.0 / std::log(std::log(1000.0)));
  for (int d = 0; d <= 40; ++d) CHECK((q[d] > 0) == (d < cap));
  CHECK(q.sum() == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("penalized prior decreases beyond one") {
  const auto q = size_prior_pmf({SparsityPriorConfig::Kind::penalized, 1.5, 10, 100});
  CHECK(std::abs(q.sum() - 1.0) <= 1e-12);
  for (int d = 1; d < 10; ++d) CHECK(q[d + 1] <= q[d]);
  CHECK(q[10] < 1);
}

TEST_CASE("size prior preconditions") {
  CHECK_THROWS_AS(size_prior_pmf({SparsityPriorConfig::Kind::cap, 1.0, 5, 2}), DomainError);
  CHECK_THROWS_AS(size_prior_pmf({SparsityPriorConfig::Kind::cap, 1.0, 0, 100}), DomainError);
  CHECK_THROWS_AS(size_prior_pmf({SparsityPriorConfig::Kind::penalized, 0.1, 5, 100}), DomainError);
}

TEST_CASE("pattern frequencies pass a chi-square test") {
  const int d_n = 5;
  const auto q = size_prior_pmf({SparsityPriorConfig::Kind::penalized, 1.2, d_n, 200});
  Rng rng = make_rng(17, 0);
  std::map<std::string, int> counts;
  constexpr int kDraws = 100000;
  for (int i = 0; i < kDraws; ++i) ++counts[sample_gamma(q, d_n, rng).to_bits()];
  double stat = 0;
  int cells = 0;
  for (int mask = 0; mask < (1 << d_n); ++mask) {
    SparsityPattern g(d_n);
    for (int j = 0; j < d_n; ++j)
      if (mask >> j & 1) g.set(j);
    const double expected = kDraws * std::exp(log_pattern_prior(q, g.cardinality()));
    if (expected < 5) continue;
    const double obs = counts[g.to_bits()];
    stat += (obs - expected) * (obs - expected) / expected;
    ++cells;
  }
  const boost::math::chi_squared chi(cells - 1);
  CHECK(boost::math::cdf(boost::math::complement(chi, stat)) > 1e-3);
}

TEST_CASE("degenerate size prior always yields the empty pattern") {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(6);
  q[0] = 1;
  Rng rng = make_rng(1, 0);
  for (int i = 0; i < 100; ++i) CHECK(sample_gamma(q, 5, rng).empty());
}

TEST_CASE("sample_gamma is deterministic given the seed") {
  const SparsityPriorConfig cfg{SparsityPriorConfig::Kind::cap, 1.0, 12, 500};
  CHECK(sample_gamma(cfg, 5) == sample_gamma(cfg, 5));
}

TEST_CASE("rescaling density vanishes at and below the truncation point") {
  const RescalingPriorConfig cfg{1.0, 1.0};
  CHECK(std::isinf(rescaling_log_density(cfg, 2, 1.0)));
  CHECK(std::isinf(rescaling_log_density(cfg, 2, 0.5)));
  CHECK(std::isinf(rescaling_log_density({1.0, 0.8}, 1, 1.2)));
  CHECK(std::isfinite(rescaling_log_density({1.0, 0.8}, 1, 1.3)));
}

TEST_CASE("rescaling density integrates to one") {
  using boost::math::quadrature::gauss_kronrod;
  for (double xi : {0.9, 1.0, 2.0})
    for (double rate : {0.5, 1.0, 3.0})
      for (int d : {1, 2, 4}) {
        const RescalingPriorConfig cfg{rate, xi};
        auto density = [&](double a) { return std::exp(rescaling_log_density(cfg, d, a)); };
        const double total = gauss_kronrod<double, 61>::integrate(density, cfg.lower(),
                                                                  std::numeric_limits<double>::infinity(), 15, 1e-12);
        CHECK(std::abs(total - 1.0) <= 1e-6);
      }
}

TEST_CASE("rescaling density sits under a fitted tail envelope") {
  // log pi(a) <= log D2 + (d - 1) log a - C2 a^d max(log^{d+1} a, 1) + C3 log d with C2 = rate / 2, C3 = 0.
  for (int d : {1, 2, 3}) {
    const RescalingPriorConfig cfg{1.0, 1.0};
    const double c2 = 0.5 * cfg.rate;
    auto excess = [&](double a) {
      const double l = std::log(a);
      return rescaling_log_density(cfg, d, a) - (d - 1) * l + c2 * std::pow(a, d) * std::max(std::pow(l, d + 1), 1.0);
    };
    double log_d2 = -1e300;
    for (double a = 1.01; a < 6; a += 0.01) log_d2 = std::max(log_d2, excess(a));
    for (double a = 1.005; a < 12; a += 0.0037) CHECK(excess(a) <= log_d2 + 0.05);
  }
}

TEST_CASE("inverse transform round trip") {
  for (int d : {1, 3})
    for (double v : {1e-4, 0.3, 5.0, 1e3}) CHECK(rescaling_transform(d, invert_rescaling_transform(d, v)) == Approx(v).epsilon(1e-10));
}

TEST_CASE("rescaling samples follow the truncated exponential law") {
  for (double xi : {1.0, 0.8}) {
    const RescalingPriorConfig cfg{1.0, xi};
    const int d = 2;
    const double t0 = rescaling_transform(d, cfg.lower());
    Rng rng = make_rng(23, 0);
    std::vector<double> t;
    constexpr int kDraws = 100000;
    for (int i = 0; i < kDraws; ++i) {
      const double a = sample_rescaling(cfg, d, rng);
      CHECK_MESSAGE(a > 1 / xi, "sample below truncation");
      t.push_back(rescaling_transform(d, a));
    }
    const double ks = oracle::ks_statistic(t, [&](double x) { return x <= t0 ? 0.0 : 1 - std::exp(-cfg.rate * (x - t0)); });
    CHECK(oracle::kolmogorov_sf(std::sqrt(static_cast<double>(kDraws)) * ks) > 1e-3);
  }
  CHECK(sample_rescaling({1.0, 1.0}, 3, 99) == sample_rescaling({1.0, 1.0}, 3, 99));
}

TEST_CASE("empty pattern draws the constant N(0,1) function") {
  // Uniform over sizes 0..3, so about a quarter of the draws are empty.
  const SparsityPriorConfig size{SparsityPriorConfig::Kind::cap, 1.0, 3, 50};
  const DesignSpec design = DesignSpec::make(3, 1.0);
  int empties = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto draw = sample_prior_function(size, {}, design, 10, seed);
    if (!draw.gamma.empty()) continue;
    ++empties;
    CHECK_FALSE(draw.a.has_value());
    REQUIRE(draw.path.truncation() == 1);
    const Eigen::Vector3d x(0.3, -2.0, 1.0), y(-1.0, 0.5, 4.0);
    CHECK(draw.path(x) == Approx(draw.path(y)));
    CHECK(draw.path(x) == Approx(draw.path.coeffs[0]));
  }
  CHECK(empties > 20);
}

TEST_CASE("hierarchical draws: size marginal and conditional covariance") {
  const SparsityPriorConfig size{SparsityPriorConfig::Kind::penalized, 1.2, 4, 200};
  const auto q = size_prior_pmf(size);
  const DesignSpec design = DesignSpec::make(4, 1.0);
  constexpr int kDraws = 20000;
  std::vector<int> counts(5, 0);
  for (int i = 0; i < kDraws; ++i)
    ++counts[static_cast<std::size_t>(sample_prior_function(size, {}, design, 2, 1000 + i).gamma.cardinality())];
  double stat = 0;
  int cells = 0;
  for (int d = 0; d <= 4; ++d) {
    const double e = kDraws * q[d];
    if (e < 5) continue;
    stat += (counts[static_cast<std::size_t>(d)] - e) * (counts[static_cast<std::size_t>(d)] - e) / e;
    ++cells;
  }
  CHECK(boost::math::cdf(boost::math::complement(boost::math::chi_squared(cells - 1), stat)) > 1e-3);

  // Given (gamma, a), the path covariance is the kernel.
  const auto gamma = SparsityPattern::from_bits("1100");
  const auto c = compute_constants(1.0, 1.5);
  auto s = std::make_shared<const Spectrum>(enumerate_spectrum(gamma, c, truncation_for_tail(2, c, 1e-6)));
  const Eigen::Vector4d p(0.2, -0.3, 9.0, 1.0), r(-0.1, 0.4, -3.0, 2.0);
  double m = 0, m2 = 0;
  for (int i = 0; i < kDraws; ++i) {
    const auto f = sample_path(s, 5000 + i);
    const double v = f(p) * f(r);
    m += v, m2 += v * v;
  }
  m /= kDraws;
  const double se = std::sqrt((m2 / kDraws - m * m) / kDraws);
  CHECK(std::abs(m - kernel_eval(gamma, 1.5, p, r)) <= 3 * se + 1e-6);
}

}  // TEST_SUITE
