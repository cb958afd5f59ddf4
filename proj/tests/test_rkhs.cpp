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

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "sesgp/rkhs.hpp"

using namespace sesgp;
using doctest::Approx;

namespace {

std::shared_ptr<const Spectrum> spectrum(int g, double xi, double a, int budget) {
  return std::make_shared<const Spectrum>(enumerate_spectrum(SparsityPattern::full(g), compute_constants(xi, a), budget));
}

}  // namespace

TEST_SUITE("rkhs") {

TEST_CASE("Lambert W fixed points") {
  CHECK(lambert_w(0.0) == 0.0);
  CHECK(lambert_w(std::numbers::e) == Approx(1.0).epsilon(1e-14));
  CHECK(lambert_w(2 * std::exp(2.0)) == Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_AS(lambert_w(-0.1), DomainError);
}

TEST_CASE("Lambert W inverse residual and monotonicity") {
  double prev = -1;
  for (int i = 0; i <= 300; ++i) {
    const double y = std::pow(10.0, -6.0 + 16.0 * i / 300);
    const double w = lambert_w(y);
    CHECK(std::abs(w * std::exp(w) - y) <= 1e-12 * y);
    CHECK(w > prev);
    prev = w;
  }
}

TEST_CASE("smoothness window") {
  CHECK_NOTHROW(SmoothnessSpec::make(1.2, 1.5, 2));
  CHECK_THROWS_AS(SmoothnessSpec::make(1.0, 1.4, 2), DomainError);
  CHECK_NOTHROW(SmoothnessSpec::make(1.0, 1.4, 2, SmoothnessSpec::Bound::closed));
  CHECK_THROWS_AS(SmoothnessSpec::make(1.0, 1.6, 2), DomainError);
  CHECK_THROWS_AS(SmoothnessSpec::make(0.9, 1.0, 2), DomainError);
  CHECK_THROWS_AS(SmoothnessSpec::make(1.0, 1.0, 2), DomainError);
}

TEST_CASE("ellipsoid axes") {
  const auto s = spectrum(2, 1.0, 1.0, 10);
  const Ellipsoid ell(s, 6);
  CHECK(ell.axes().size() == 6);
  CHECK(ell.axes()[0] == Approx(0.25));
  CHECK_THROWS_AS(Ellipsoid(s, 11), DomainError);
}

TEST_CASE("entropy at xi = 1, a = 1, |gamma| = 1, eps = 0.05") {
  const auto r = entropy_bounds(Ellipsoid(spectrum(1, 1.0, 1.0, 30)), 0.05);
  REQUIRE(std::holds_alternative<EntropyEstimate>(r));
  const auto& e = std::get<EntropyEstimate>(r);
  // B = 1/2, V / (2 v1) = 4.
  CHECK(e.m_star == Approx((2 * std::log(20.0) - 0.5 * std::log(4.0)) / std::log(2.0)).epsilon(1e-12));
  CHECK(e.m_star == Approx(7.6439).epsilon(1e-4));
  CHECK(e.tau == 8);
  CHECK(e.log_lower == Approx(9 * std::log(2.0)).epsilon(1e-12));
  CHECK(e.log_lower <= e.log_upper);
  // log_upper from its definition, with mu_i the leading univariate eigenvalues.
  double half_log_mu = 0;
  for (int i = 0; i <= 8; ++i) half_log_mu += 0.5 * std::log(0.5 * std::pow(0.5, i));
  CHECK(e.log_upper == Approx(18 * std::log(2.0) + 9 * std::log(20.0) + half_log_mu).epsilon(1e-12));
}

TEST_CASE("entropy tau follows the binomial rule") {
  for (double eps : {0.1, 0.01, 1e-3}) {
    const auto r = entropy_bounds(Ellipsoid(spectrum(2, 1.0, 1.0, 400)), eps);
    REQUIRE(std::holds_alternative<EntropyEstimate>(r));
    const auto& e = std::get<EntropyEstimate>(r);
    const int m = static_cast<int>(std::floor(e.m_star));
    CHECK(e.tau == (m + 2) * (m + 1) / 2);
  }
}

TEST_CASE("entropy bounds grow as eps shrinks") {
  double lo = 0, up = -1e300;
  for (int k = 4; k <= 12; ++k) {
    const auto r = entropy_bounds(Ellipsoid(spectrum(1, 1.0, 1.0, 60)), std::ldexp(1.0, -k));
    REQUIRE(std::holds_alternative<EntropyEstimate>(r));
    const auto& e = std::get<EntropyEstimate>(r);
    CHECK(e.log_lower <= e.log_upper);
    CHECK(e.log_lower >= lo);
    CHECK(e.log_upper > up);
    lo = e.log_lower;
    up = e.log_upper;
  }
}

TEST_CASE("entropy lower bound scales like log(1/eps)^|gamma|") {
  for (int g : {1, 2}) {
    std::vector<double> x, y;
    for (int k = 4; k <= 12; ++k) {
      const double eps = std::ldexp(1.0, -k);
      const auto r = entropy_bounds(Ellipsoid(spectrum(g, 1.0, 1.0, 500)), eps);
      REQUIRE(std::holds_alternative<EntropyEstimate>(r));
      x.push_back(std::log(std::log(1 / eps)));
      y.push_back(std::log(std::get<EntropyEstimate>(r).log_lower));
    }
    const double slope = oracle::ols_slope(x, y);
    CHECK(slope >= g - 0.3);
    CHECK(slope <= g + 0.3);
  }
}

TEST_CASE("entropy hypothesis violations are reported") {
  // eps^{-2} >= (a xi)^g fails.
  CHECK(std::holds_alternative<HypothesisReport>(entropy_bounds(Ellipsoid(spectrum(1, 1.0, 50.0, 10)), 0.1)));
  // a xi log(1/eps) > g fails.
  CHECK(std::holds_alternative<HypothesisReport>(entropy_bounds(Ellipsoid(spectrum(3, 1.0, 1.0, 10)), 0.5)));
}

TEST_CASE("decentering: origin feasible") {
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(3, 0.2);
  const Eigen::VectorXd f = Eigen::Vector3d(0.1, 0.1, 0.1);
  const auto r = decentering(mu, f, 0.5);
  CHECK(r.inf_sq_norm == 0.0);
  CHECK(r.coeffs.isZero());
}

TEST_CASE("decentering: one coefficient closed form") {
  Eigen::VectorXd mu(1), f(1);
  mu << 0.5;
  f << 1.0;
  const auto r = decentering(mu, f, 0.5);
  CHECK(r.multiplier == Approx(0.5).epsilon(1e-10));
  CHECK(r.coeffs[0] == Approx(0.5).epsilon(1e-10));
  CHECK(r.inf_sq_norm == Approx(0.5).epsilon(1e-10));
}

TEST_CASE("decentering: KKT conditions and grid oracle") {
  Rng rng = make_rng(3, 0);
  std::normal_distribution<double> normal;
  for (int inst = 0; inst < 20; ++inst) {
    Eigen::VectorXd mu(6), f(6);
    for (int j = 0; j < 6; ++j) mu[j] = std::pow(0.5, j + 1), f[j] = normal(rng);
    const double eps = 0.3 * f.norm();
    const auto r = decentering(mu, f, eps);
    const double resid = (r.coeffs - f).squaredNorm();
    CHECK(resid <= eps * eps + 1e-10);
    CHECK(std::abs(r.multiplier * (eps * eps - resid)) <= 1e-8);
    CHECK(r.inf_sq_norm == Approx(oracle::decentering_by_grid(mu, f, eps).first).epsilon(1e-4));
  }
}

TEST_CASE("decentering is monotone in eps and in the axes") {
  Eigen::VectorXd mu(4), f(4);
  mu << 0.4, 0.2, 0.1, 0.05;
  f << 1.0, -0.5, 0.3, 0.2;
  double prev = 0;
  for (double eps = 1.0; eps > 1e-3; eps /= 2) {
    const double v = decentering(mu, f, eps).inf_sq_norm;
    CHECK(v >= prev);
    prev = v;
  }
  const double base = decentering(mu, f, 0.2).inf_sq_norm;
  for (int j = 0; j < 4; ++j) {
    Eigen::VectorXd bigger = mu;
    bigger[j] *= 1.1;
    CHECK(decentering(bigger, f, 0.2).inf_sq_norm <= base + 1e-12);
  }
}

TEST_CASE("decentering on an ellipsoid and series") {
  auto s = spectrum(1, 1.0, 2.0, 20);
  Series target{s, Eigen::VectorXd::Zero(20)};
  target.coeffs[0] = 1.0;
  const double eps = 0.2;
  const auto r = decentering(Ellipsoid(s), target, eps);
  CHECK(r.inf_sq_norm == Approx((1 - eps) * (1 - eps) / s->eigenvalue(0)).epsilon(1e-10));
}

TEST_CASE("Lemma 3 bound: value and monotonicity") {
  const auto spec = SmoothnessSpec::make(1.0, 1.5, 1);
  const auto b = decentering_upper_bound(2.0, spec, 1.0, 0.1);
  CHECK(b.log_value == Approx(std::log(4 * std::sqrt(std::numbers::pi)) + 25).epsilon(1e-12));
  CHECK(b.fourier_cutoff > 0);
  for (double eps : {0.4, 0.2, 0.1, 0.05})
    CHECK(decentering_upper_bound(2.0, spec, 1.0, 2 * eps).log_value <=
          decentering_upper_bound(2.0, spec, 1.0, eps).log_value);
}

TEST_CASE("Lemma 3 bound dominates the exact decentering") {
  const auto spec = SmoothnessSpec::make(1.0, 1.5, 1);
  for (double a : {1.5, 2.0, 4.0}) {
    auto s = spectrum(1, 1.0, a, 40);
    Series target{s, Eigen::VectorXd::Zero(40)};
    for (int j = 0; j < 40; ++j) target.coeffs[j] = std::pow(0.6, j);
    for (double eps : {0.3, 0.1, 0.05}) {
      const double exact = decentering(Ellipsoid(s), target, eps).inf_sq_norm;
      CHECK(std::log(std::max(exact, 1e-300)) <=
            decentering_upper_bound(a, spec, std::sqrt(target.squared_l2_norm()), eps).log_value);
    }
  }
}

TEST_CASE("Lemma 4 bound: value and saturation") {
  const auto spec = SmoothnessSpec::make(1.2, 1.5, 2);
  const auto b = decentering_lower_bound(1.0, 3, spec, 1.0, 0.1);
  CHECK(b.log_value ==
        Approx(2 * std::log(0.1) + 3 * std::log(1 / std::sqrt(2.0)) + std::pow(0.1, -4.0 / 3)).epsilon(1e-12));
  // The exponent is capped by xi^2 (a <= 1/xi) and decays like a^{-2} beyond.
  const double xi = 1.3;
  const double cap = std::pow(0.1, -2.0 / 1.5) * xi * xi;
  for (double a : {0.1, 0.5, 1 / xi}) {
    const auto b2 = decentering_lower_bound(a, 3, spec, xi, 0.1);
    CHECK(b2.log_value - 2 * std::log(0.1) - 3 * std::log(xi * a / std::sqrt(2.0)) == Approx(cap).epsilon(1e-12));
  }
  const auto big = decentering_lower_bound(1e6, 3, spec, xi, 0.1);
  CHECK(big.log_value - 2 * std::log(0.1) - 3 * std::log(xi * 1e6 / std::sqrt(2.0)) < 1e-9);
  CHECK_THROWS_AS(decentering_lower_bound(1.0, 2, spec, 1.0, 0.1), DomainError);
}

}  // TEST_SUITE
