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
#include <numeric>

#include "oracles.hpp"
#include "sesgp/eigenexpansion.hpp"

using namespace sesgp;
using doctest::Approx;

TEST_SUITE("eigenexpansion") {

TEST_CASE("constants at xi = 1, a = 1") {
  const auto c = compute_constants(1.0, 1.0);
  CHECK(c.v1 == Approx(0.25).epsilon(1e-15));
  CHECK(c.v2 == Approx(1.0).epsilon(1e-15));
  CHECK(c.v3 == Approx(0.75).epsilon(1e-15));
  CHECK(c.V == Approx(2.0).epsilon(1e-15));
  CHECK(c.B == Approx(0.5).epsilon(1e-15));
}

TEST_CASE("small-a limit") {
  const auto c = compute_constants(1.0, 1e-8);
  CHECK(c.B < 1e-6);
  CHECK(std::abs(c.V - 0.5) < 1e-6);
}

TEST_CASE("algebraic identity (v1 + v3)^2 = 2 v1 V") {
  for (double xi : {0.3, 1.0, 2.5})
    for (double a : {0.01, 0.7, 1.0, 5.0, 40.0}) {
      const auto c = compute_constants(xi, a);
      CHECK(std::abs((c.v1 + c.v3) * (c.v1 + c.v3) - 2 * c.v1 * c.V) <= 1e-12 * (2 * c.v1 * c.V));
      CHECK(c.B > 0);
      CHECK(c.B < 1);
    }
}

TEST_CASE("non-positive inputs are rejected") {
  CHECK_THROWS_AS(compute_constants(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(compute_constants(1.0, -1.0), DomainError);
}

TEST_CASE("univariate eigenvalues") {
  const auto c = compute_constants(1.0, 1.0);
  CHECK(univariate_eigenvalue(c, 0) == Approx(0.5).epsilon(1e-15));
  CHECK(univariate_eigenvalue(c, 3) == Approx(0.0625).epsilon(1e-15));
  double sum = 0;
  for (int j = 0; j < 200; ++j) sum += univariate_eigenvalue(c, j);
  CHECK(std::abs(sum - 1.0) <= 1e-12);
  CHECK(std::abs(c.lead() / (1 - c.B) - 1.0) <= 1e-12);
}

TEST_CASE("eigenfunction special values") {
  const auto c = compute_constants(1.0, 1.0);
  CHECK(eigenfunction_eval(c, 0, 0.0) == Approx(eigenfunction_norm0(c)));
  CHECK(eigenfunction_norm0(c) > 0);
  CHECK(std::abs(eigenfunction_eval(c, 1, 0.0)) < 1e-15);
  CHECK(eigenfunction_eval(c, 3, -0.7) == Approx(-eigenfunction_eval(c, 3, 0.7)));
}

TEST_CASE("eigenfunctions are orthonormal under 80-node Gauss-Hermite") {
  const Eigen::VectorXd u = oracle::gauss_hermite(80).first;
  const Eigen::VectorXd w = oracle::gauss_hermite_scaled_weights(u);
  for (double xi : {1.0, 1.5}) {
    const auto c = compute_constants(xi, 1.3);
    const double scale = std::sqrt(2 * c.v3);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(21, 21);
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double x = u[i] / scale;
      const double g = std::exp(-x * x / (2 * xi * xi)) / std::sqrt(2 * std::numbers::pi * xi * xi);
      const Eigen::VectorXd phi = eigenfunction_values(c, 20, x);
      gram += w[i] * g / scale * phi * phi.transpose();
    }
    CHECK((gram - Eigen::MatrixXd::Identity(21, 21)).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("eigenfunction degree cap and overflow reporting") {
  const auto c = compute_constants(1.0, 1.0);
  CHECK_THROWS_AS(eigenfunction_values(c, 513, 0.1), DomainError);
  CHECK_NOTHROW(eigenfunction_values(c, 512, 3.0));
  CHECK_NOTHROW(eigenfunction_values(c, 512, 400.0));
  // Small xi: phi_j grows like exp(x^2 / (4 xi^2)) far out.
  CHECK_THROWS_AS(eigenfunction_values(compute_constants(0.01, 1.0), 512, 30.0), NumericalError);
  for (double v : eigenfunction_values(c, 512, 30.0)) CHECK(std::isfinite(v));
}

TEST_CASE("spectrum for |gamma| = 2") {
  const auto s = enumerate_spectrum(SparsityPattern::full(2), compute_constants(1.0, 1.0), 6);
  const std::vector<double> want{0.25, 0.125, 0.125, 0.0625, 0.0625, 0.0625};
  REQUIRE(s.size() == 6);
  for (int k = 0; k < 6; ++k) CHECK(s.eigenvalue(k) == Approx(want[static_cast<std::size_t>(k)]).epsilon(1e-14));
  CHECK(s.entries()[1].multi_index == std::vector<int>{0, 1});
  CHECK(s.entries()[2].multi_index == std::vector<int>{1, 0});
}

TEST_CASE("spectrum for |gamma| = 1 matches univariate eigenvalues") {
  const auto c = compute_constants(1.3, 0.9);
  const auto s = enumerate_spectrum(SparsityPattern::full(1), c, 4);
  for (int j = 0; j < 4; ++j) CHECK(s.eigenvalue(j) == Approx(univariate_eigenvalue(c, j)).epsilon(1e-14));
}

TEST_CASE("degree multiplicities and ordering") {
  const auto c = compute_constants(1.0, 2.0);
  const auto s = enumerate_spectrum(SparsityPattern::full(3), c, 35);
  int degree3 = 0;
  for (const auto& e : s.entries()) degree3 += e.degree == 3;
  CHECK(degree3 == 10);
  for (int k = 1; k < s.size(); ++k) {
    CHECK(s.eigenvalue(k) <= s.eigenvalue(k - 1));
    const auto& p = s.entries()[static_cast<std::size_t>(k - 1)];
    const auto& q = s.entries()[static_cast<std::size_t>(k)];
    CHECK((p.degree < q.degree || (p.degree == q.degree && p.multi_index < q.multi_index)));
  }
  const double mu0 = std::pow(2 * c.v1 / c.V, 1.5);
  for (const auto& e : s.entries()) CHECK(e.eigenvalue == Approx(mu0 * std::pow(c.B, e.degree)).epsilon(1e-13));
}

TEST_CASE("partial sums stay below one and the tail closes the gap") {
  for (int g = 1; g <= 4; ++g) {
    const auto s = enumerate_spectrum(SparsityPattern::full(g), compute_constants(1.0, 1.5), 300);
    const double partial = s.eigenvalues().sum();
    CHECK(partial <= 1.0 + 1e-12);
    CHECK(partial + s.tail() == Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("empty pattern has no spectrum") {
  CHECK_THROWS_AS(enumerate_spectrum(SparsityPattern(4), compute_constants(1.0, 1.0), 3), EmptyModelError);
}

TEST_CASE("kernel ignores excluded coordinates") {
  SparsityPattern g(2);
  g.set(0);
  Eigen::Vector2d s(0, 5), t(1, -5);
  CHECK(kernel_eval(g, 1.0, s, t) == Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(kernel_eval(g, 3.7, s, s) == 1.0);
}

TEST_CASE("Mercer reconstruction on a grid") {
  const auto c = compute_constants(1.0, 1.0);
  const int J = truncation_for_tail(1, c, 1e-8);
  const auto s = enumerate_spectrum(SparsityPattern::full(1), c, J);
  CHECK(s.tail() <= 1e-8);
  double worst = 0;
  for (int i = 0; i <= 40; ++i)
    for (int k = 0; k <= 40; ++k) {
      Eigen::VectorXd p(1), q(1);
      p << -2 + 0.1 * i;
      q << -2 + 0.1 * k;
      worst = std::max(worst, std::abs(mercer_sum(s, p, q) - kernel_eval(SparsityPattern::full(1), 1.0, p, q)));
    }
  CHECK(worst <= 1e-6);
}

TEST_CASE("Mercer reconstruction in two dimensions") {
  const auto c = compute_constants(1.0, 0.8);
  const auto gamma = SparsityPattern::full(2);
  const auto s = enumerate_spectrum(gamma, c, 2000);
  Eigen::Vector2d p(0.3, -1.1), q(-0.4, 0.9);
  CHECK(std::abs(mercer_sum(s, p, q) - kernel_eval(gamma, 0.8, p, q)) <= 1e-6);
}

TEST_CASE("truncation helper meets its tolerance minimally") {
  const auto c = compute_constants(1.0, 2.0);
  for (int g = 1; g <= 3; ++g) {
    const int J = truncation_for_tail(g, c, 1e-4);
    CHECK(enumerate_spectrum(SparsityPattern::full(g), c, J).tail() <= 1e-4);
    if (J > 1) CHECK(enumerate_spectrum(SparsityPattern::full(g), c, J - 1).tail() > 1e-4);
  }
}

TEST_CASE("sample paths are deterministic and satisfy Parseval") {
  auto s = std::make_shared<const Spectrum>(enumerate_spectrum(SparsityPattern::full(2), compute_constants(1.0, 1.0), 40));
  const auto f = sample_path(s, 42);
  const auto g = sample_path(s, 42);
  CHECK(f.coeffs == g.coeffs);
  CHECK(f.truncation() == 40);
  CHECK(f.squared_l2_norm() == Approx(f.coeffs.squaredNorm()).epsilon(1e-15));
  CHECK(sample_path(s, 43).coeffs != f.coeffs);
}

TEST_CASE("Parseval against Gauss-Hermite integration of a path") {
  auto s = std::make_shared<const Spectrum>(enumerate_spectrum(SparsityPattern::full(1), compute_constants(1.0, 1.0), 15));
  const auto f = sample_path(s, 5);
  // E f(X)^2 for X ~ N(0,1): probabilists' rule from the physicists' one by x = sqrt(2) u.
  const auto [u, w] = oracle::gauss_hermite(80);
  double integral = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    Eigen::VectorXd x(1);
    x << std::numbers::sqrt2 * u[i];
    integral += w[i] / std::sqrt(std::numbers::pi) * f(x) * f(x);
  }
  CHECK(integral == Approx(f.squared_l2_norm()).epsilon(1e-8));
}

TEST_CASE("path moments match the spectrum") {
  auto s = std::make_shared<const Spectrum>(enumerate_spectrum(SparsityPattern::full(1), compute_constants(1.0, 1.0), 20));
  constexpr int kDraws = 100000;
  Eigen::VectorXd ps(1), pt(1);
  ps << 0.4;
  pt << -0.9;
  const Eigen::VectorXd bs = s->basis_values(ps), bt = s->basis_values(pt);
  double m = 0, m2 = 0, c = 0, c2 = 0;
  for (int i = 0; i < kDraws; ++i) {
    const auto f = sample_path(s, static_cast<std::uint64_t>(i) + 1000);
    const double n2 = f.squared_l2_norm();
    const double prod = f.coeffs.dot(bs) * f.coeffs.dot(bt);
    m += n2, m2 += n2 * n2, c += prod, c2 += prod * prod;
  }
  m /= kDraws, c /= kDraws;
  const double se_m = std::sqrt((m2 / kDraws - m * m) / kDraws);
  const double se_c = std::sqrt((c2 / kDraws - c * c) / kDraws);
  CHECK(std::abs(m - s->eigenvalues().sum()) <= 3 * se_m);
  CHECK(std::abs(c - mercer_sum(*s, ps, pt)) <= 3 * se_c);
}

TEST_CASE("design spec validation") {
  CHECK_THROWS_AS(DesignSpec::make(3, 0.5), DomainError);
  CHECK_NOTHROW(DesignSpec::make(3, 0.5, true));
  CHECK_THROWS_AS(DesignSpec::make(0, 1.0), DomainError);
  CHECK(DesignSpec::make(3, 1.0).dim == 3);
}

TEST_CASE("sparsity pattern bookkeeping") {
  auto g = SparsityPattern::from_bits("10110");
  CHECK(g.cardinality() == 3);
  CHECK(g.indices() == std::vector<int>{0, 2, 3});
  g.flip(0);
  CHECK(g.cardinality() == 2);
  g.set(2, true);
  CHECK(g.cardinality() == 2);
  CHECK(SparsityPattern::from_hex(g.to_hex(), 5) == g);
  const std::vector<int> idx{1, 3};
  CHECK(SparsityPattern::from_indices(5, idx).is_subset_of(SparsityPattern::full(5)));
  CHECK(SparsityPattern::from_bits("11").to_hex() == "3");
}

}  // TEST_SUITE
