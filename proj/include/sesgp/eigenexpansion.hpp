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
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sesgp/common.hpp"

namespace sesgp {

/// Isotropic Gaussian design N(0, xi^2 I_dim).
struct DesignSpec {
  int dim = 1;
  double xi = 1.0;

  /// Validates dim >= 1 and xi^2 > 2/e; `unsafe` skips the variance floor.
  static DesignSpec make(int dim, double xi, bool unsafe = false);
};

/// Binary inclusion vector over the design coordinates.
class SparsityPattern {
 public:
  SparsityPattern() = default;
  explicit SparsityPattern(int dim) : bits_(static_cast<std::size_t>(dim), false) {}

  static SparsityPattern full(int dim);
  static SparsityPattern from_indices(int dim, std::span<const int> indices);
  /// Parses "0101"-style strings, first character is coordinate 0.
  static SparsityPattern from_bits(std::string_view bits);
  /// Inverse of to_hex(); `dim` fixes the length.
  static SparsityPattern from_hex(std::string_view hex, int dim);

  int dim() const { return static_cast<int>(bits_.size()); }
  int cardinality() const { return cardinality_; }
  bool empty() const { return cardinality_ == 0; }
  bool test(int i) const { return bits_[static_cast<std::size_t>(i)]; }
  void set(int i, bool on = true);
  void flip(int i) { set(i, !test(i)); }

  std::vector<int> indices() const;
  bool is_subset_of(const SparsityPattern& other) const;

  /// Coordinate i is bit (i % 4) of nibble i / 4; nibbles printed most significant first.
  std::string to_hex() const;
  std::string to_bits() const;

  const std::vector<bool>& bits() const { return bits_; }

  friend bool operator==(const SparsityPattern& l, const SparsityPattern& r) { return l.bits_ == r.bits_; }
  friend std::strong_ordering operator<=>(const SparsityPattern& l, const SparsityPattern& r) {
    if (l.bits_ < r.bits_) return std::strong_ordering::less;
    if (r.bits_ < l.bits_) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

 private:
  std::vector<bool> bits_;
  int cardinality_ = 0;
};

struct SparsityPatternHash {
  std::size_t operator()(const SparsityPattern& p) const { return std::hash<std::vector<bool>>{}(p.bits()); }
};

/// Constants of the closed-form Mercer expansion of exp(-a^2 (s-t)^2) under N(0, xi^2).
template <typename Scalar = double>
struct EigenConstants {
  Scalar xi;
  Scalar a;
  Scalar v1;
  Scalar v2;
  Scalar v3;
  Scalar V;
  Scalar B;

  /// sqrt(2 v1 / V), the leading univariate eigenvalue.
  Scalar lead() const { return std::sqrt(2 * v1 / V); }
};

template <typename Scalar = double>
EigenConstants<Scalar> compute_constants(Scalar xi, Scalar a) {
  if (!(xi > 0) || !(a > 0)) throw DomainError("compute_constants: xi and a must be positive");
  EigenConstants<Scalar> c;
  c.xi = xi;
  c.a = a;
  c.v1 = 1 / (4 * xi * xi);
  c.v2 = a * a;
  c.v3 = std::sqrt(c.v1 * c.v1 + 2 * c.v1 * c.v2);
  c.V = c.v1 + c.v2 + c.v3;
  c.B = c.v2 / c.V;
  return c;
}

template <typename Scalar>
Scalar univariate_eigenvalue(const EigenConstants<Scalar>& c, int j) {
  return c.lead() * std::pow(c.B, static_cast<Scalar>(j));
}

inline constexpr int kMaxHermiteDegree = 512;

/// Normalizing constant N_0 = (v3/v1)^{1/4}; N_j = N_0 / sqrt(2^j j!) is folded into the recurrence.
template <typename Scalar>
Scalar eigenfunction_norm0(const EigenConstants<Scalar>& c) {
  return std::pow(c.v3 / c.v1, Scalar(0.25));
}

/// phi_0(x) .. phi_{max_j}(x), orthonormal in L2(N(0, xi^2)).
///
/// Uses the normalized Hermite recurrence
///   h_{k+1} = sqrt(2/(k+1)) u h_k - sqrt(k/(k+1)) h_{k-1},  u = sqrt(2 v3) x,
/// with mantissa/exponent splitting so that the Gaussian envelope
/// exp(-(v3 - v1) x^2) is applied once per value.
template <typename Scalar>
Vector<Scalar> eigenfunction_values(const EigenConstants<Scalar>& c, int max_j, Scalar x) {
  if (max_j < 0) throw DomainError("eigenfunction_values: negative degree");
  if (max_j > kMaxHermiteDegree) throw DomainError("eigenfunction_values: degree above 512");
  constexpr Scalar kRescale = Scalar(1e150);
  const Scalar log_rescale = std::log(kRescale);
  const Scalar u = std::sqrt(2 * c.v3) * x;
  const Scalar log_envelope = -(c.v3 - c.v1) * x * x + std::log(eigenfunction_norm0(c));

  Vector<Scalar> out(max_j + 1);
  Scalar prev = 0;
  Scalar cur = 1;
  Scalar log_scale = 0;
  auto emit = [&](int k, Scalar mantissa) {
    if (mantissa == 0) {
      out[k] = 0;
      return;
    }
    const Scalar log_abs = std::log(std::abs(mantissa)) + log_scale + log_envelope;
    if (log_abs > std::log(std::numeric_limits<Scalar>::max())) {
      throw NumericalError("eigenfunction_values: phi_" + std::to_string(k) + " overflows at x = " +
                           std::to_string(static_cast<double>(x)));
    }
    out[k] = std::copysign(std::exp(log_abs), mantissa);
  };
  emit(0, cur);
  for (int k = 0; k < max_j; ++k) {
    const Scalar kk = static_cast<Scalar>(k);
    Scalar next = std::sqrt(2 / (kk + 1)) * u * cur - std::sqrt(kk / (kk + 1)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > kRescale) {
      cur /= kRescale;
      prev /= kRescale;
      log_scale += log_rescale;
    }
    emit(k + 1, cur);
  }
  return out;
}

template <typename Scalar>
Scalar eigenfunction_eval(const EigenConstants<Scalar>& c, int j, Scalar x) {
  return eigenfunction_values(c, j, x)[j];
}

/// exp(-a^2 ||s_gamma - t_gamma||^2); unselected coordinates are ignored.
template <typename Scalar, typename DerivedS, typename DerivedT>
Scalar kernel_eval(const SparsityPattern& gamma, Scalar a, const Eigen::MatrixBase<DerivedS>& s,
                   const Eigen::MatrixBase<DerivedT>& t) {
  Scalar sq = 0;
  for (int i = 0; i < gamma.dim(); ++i) {
    if (gamma.test(i)) {
      const Scalar d = s(i) - t(i);
      sq += d * d;
    }
  }
  return std::exp(-a * a * sq);
}

/// One term of the tensor expansion: multi-index over the selected coordinates.
template <typename Scalar>
struct SpectrumEntry {
  std::vector<int> multi_index;
  int degree = 0;
  Scalar eigenvalue = 0;
};

namespace detail {

/// mu_0 * sum_{m' >= m} binom(g + m' - 1, m') B^{m'}, summed forward until negligible.
template <typename Scalar>
Scalar degree_tail(int g, const EigenConstants<Scalar>& c, int m) {
  if (g == 0) return m == 0 ? Scalar(1) : Scalar(0);
  const Scalar mu0 = std::pow(c.lead(), static_cast<Scalar>(g));
  // log of binom(g + m - 1, m) B^m
  Scalar log_term = std::lgamma(Scalar(g + m)) - std::lgamma(Scalar(m + 1)) - std::lgamma(Scalar(g)) +
                    static_cast<Scalar>(m) * std::log(c.B);
  Scalar term = std::exp(log_term);
  Scalar sum = 0;
  for (int k = m; k < m + 1000000; ++k) {
    sum += term;
    const Scalar ratio = c.B * static_cast<Scalar>(g + k) / static_cast<Scalar>(k + 1);
    term *= ratio;
    if (ratio < 1 && term < sum * std::numeric_limits<Scalar>::epsilon() * Scalar(1e-2)) break;
    if (term == 0) break;
  }
  return mu0 * sum;
}

/// Multi-indices of length g with entries summing to m, lexicographically ascending.
inline void compositions(int g, int m, std::vector<int>& prefix, std::vector<std::vector<int>>& out,
                         std::size_t limit) {
  if (out.size() >= limit) return;
  if (static_cast<int>(prefix.size()) == g - 1) {
    prefix.push_back(m);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int first = 0; first <= m && out.size() < limit; ++first) {
    prefix.push_back(first);
    compositions(g, m - first, prefix, out, limit);
    prefix.pop_back();
  }
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}

}  // namespace detail

/// Ordered eigenpairs of K_{a,gamma} under N(0, xi^2 I): total degree first,
/// lexicographic on the multi-index within a degree.
template <typename Scalar = double>
class EigenSpectrum {
 public:
  EigenSpectrum(SparsityPattern gamma, EigenConstants<Scalar> constants, std::vector<SpectrumEntry<Scalar>> entries)
      : gamma_(std::move(gamma)),
        constants_(constants),
        coords_(gamma_.indices()),
        entries_(std::move(entries)) {
    for (const auto& e : entries_) max_degree_ = std::max(max_degree_, e.degree);
  }

  const SparsityPattern& gamma() const { return gamma_; }
  const EigenConstants<Scalar>& constants() const { return constants_; }
  const std::vector<int>& coordinates() const { return coords_; }
  const std::vector<SpectrumEntry<Scalar>>& entries() const { return entries_; }
  int size() const { return static_cast<int>(entries_.size()); }
  int max_degree() const { return max_degree_; }
  Scalar eigenvalue(int k) const { return entries_[static_cast<std::size_t>(k)].eigenvalue; }

  Vector<Scalar> eigenvalues() const {
    Vector<Scalar> mu(size());
    for (int k = 0; k < size(); ++k) mu[k] = eigenvalue(k);
    return mu;
  }

  /// Sum of the eigenvalues not represented, i.e. 1 - partial trace.
  Scalar tail() const {
    const int g = gamma_.cardinality();
    if (g == 0) return 0;
    if (entries_.empty()) return 1;
    const int last = entries_.back().degree;
    const double full = detail::binomial(g + last - 1, last);
    int present = 0;
    for (auto it = entries_.rbegin(); it != entries_.rend() && it->degree == last; ++it) ++present;
    const Scalar missing_in_last = static_cast<Scalar>(full - present) * entries_.back().eigenvalue;
    return missing_in_last + detail::degree_tail(g, constants_, last + 1);
  }

  /// psi_0(x) .. psi_{size-1}(x) at a full design point x.
  template <typename Derived>
  Vector<Scalar> basis_values(const Eigen::MatrixBase<Derived>& x) const {
    const int g = static_cast<int>(coords_.size());
    Vector<Scalar> psi = Vector<Scalar>::Ones(size());
    if (g == 0) return psi;
    std::vector<Vector<Scalar>> phi;
    phi.reserve(static_cast<std::size_t>(g));
    for (int c : coords_) phi.push_back(eigenfunction_values(constants_, max_degree_, static_cast<Scalar>(x(c))));
    for (int k = 0; k < size(); ++k) {
      const auto& mi = entries_[static_cast<std::size_t>(k)].multi_index;
      Scalar v = 1;
      for (int i = 0; i < g; ++i) v *= phi[static_cast<std::size_t>(i)][mi[static_cast<std::size_t>(i)]];
      psi[k] = v;
    }
    return psi;
  }

  /// Row i holds basis_values(X.row(i)).
  template <typename Derived>
  Matrix<Scalar> basis_matrix(const Eigen::MatrixBase<Derived>& X) const {
    Matrix<Scalar> out(X.rows(), size());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out.row(i) = basis_values(X.row(i).transpose()).transpose();
    return out;
  }

 private:
  SparsityPattern gamma_;
  EigenConstants<Scalar> constants_;
  std::vector<int> coords_;
  std::vector<SpectrumEntry<Scalar>> entries_;
  int max_degree_ = 0;
};

/// First `budget` eigenpairs of K_{a,gamma} in canonical order.
template <typename Scalar = double>
EigenSpectrum<Scalar> enumerate_spectrum(const SparsityPattern& gamma, const EigenConstants<Scalar>& c, int budget) {
  const int g = gamma.cardinality();
  if (g == 0) throw EmptyModelError("enumerate_spectrum: empty sparsity pattern has no spectrum");
  if (budget < 1) throw DomainError("enumerate_spectrum: budget must be >= 1");
  const Scalar mu0 = std::pow(c.lead(), static_cast<Scalar>(g));
  std::vector<SpectrumEntry<Scalar>> entries;
  entries.reserve(static_cast<std::size_t>(budget));
  const auto limit = static_cast<std::size_t>(budget);
  for (int m = 0; entries.size() < limit; ++m) {
    std::vector<std::vector<int>> idx;
    std::vector<int> prefix;
    detail::compositions(g, m, prefix, idx, limit - entries.size());
    const Scalar mu = mu0 * std::pow(c.B, static_cast<Scalar>(m));
    for (auto& mi : idx) entries.push_back({std::move(mi), m, mu});
  }
  return EigenSpectrum<Scalar>(gamma, c, std::move(entries));
}

/// Spectrum of the constant-function prior attached to the empty pattern:
/// one unit eigenvalue with psi_0 = 1.
template <typename Scalar = double>
EigenSpectrum<Scalar> constant_spectrum(int dim, const EigenConstants<Scalar>& c) {
  return EigenSpectrum<Scalar>(SparsityPattern(dim), c, {SpectrumEntry<Scalar>{{}, 0, Scalar(1)}});
}

/// Smallest J whose omitted eigenvalue mass is <= tol.
template <typename Scalar = double>
int truncation_for_tail(int gamma_size, const EigenConstants<Scalar>& c, Scalar tol) {
  if (gamma_size < 1) return 1;
  if (!(tol > 0)) throw DomainError("truncation_for_tail: tolerance must be positive");
  const Scalar mu0 = std::pow(c.lead(), static_cast<Scalar>(gamma_size));
  double before = 0;  // entries in degrees < m
  for (int m = 0;; ++m) {
    const double count = detail::binomial(gamma_size + m - 1, m);
    const Scalar rest_next = detail::degree_tail(gamma_size, c, m + 1);
    if (rest_next <= tol) {
      const Scalar rest = detail::degree_tail(gamma_size, c, m);
      const Scalar e = mu0 * std::pow(c.B, static_cast<Scalar>(m));
      double k = std::ceil(static_cast<double>((rest - tol) / e) - 1e-9);
      k = std::clamp(k, 0.0, count);
      const double j = before + k;
      if (j > 5e7) throw DomainError("truncation_for_tail: tolerance needs more than 5e7 terms");
      return std::max(1, static_cast<int>(j));
    }
    before += count;
    if (before > 5e7) throw DomainError("truncation_for_tail: tolerance needs more than 5e7 terms");
  }
}

/// Sum_k mu_k psi_k(s) psi_k(t) over the spectrum's entries.
template <typename Scalar, typename DerivedS, typename DerivedT>
Scalar mercer_sum(const EigenSpectrum<Scalar>& spectrum, const Eigen::MatrixBase<DerivedS>& s,
                  const Eigen::MatrixBase<DerivedT>& t) {
  const Vector<Scalar> ps = spectrum.basis_values(s);
  const Vector<Scalar> pt = spectrum.basis_values(t);
  return (spectrum.eigenvalues().array() * ps.array() * pt.array()).sum();
}

/// Finite Karhunen-Loeve series sum_j coeffs_j psi_j.
template <typename Scalar = double>
struct SeriesFunction {
  std::shared_ptr<const EigenSpectrum<Scalar>> spectrum;
  Vector<Scalar> coeffs;

  int truncation() const { return static_cast<int>(coeffs.size()); }

  /// ||f||^2 in L2(Q), by orthonormality of the basis.
  Scalar squared_l2_norm() const { return coeffs.squaredNorm(); }

  template <typename Derived>
  Scalar operator()(const Eigen::MatrixBase<Derived>& x) const {
    return spectrum->basis_values(x).head(coeffs.size()).dot(coeffs);
  }
};

/// coeffs_j = Z_j sqrt(mu_j), Z_j iid N(0,1) from the stream keyed by `seed`.
template <typename Scalar = double>
SeriesFunction<Scalar> sample_path(std::shared_ptr<const EigenSpectrum<Scalar>> spectrum, std::uint64_t seed) {
  if (!spectrum || spectrum->size() < 1) throw DomainError("sample_path: empty spectrum");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal;
  Vector<Scalar> coeffs(spectrum->size());
  for (int j = 0; j < spectrum->size(); ++j)
    coeffs[j] = static_cast<Scalar>(normal(rng)) * std::sqrt(spectrum->eigenvalue(j));
  return {std::move(spectrum), std::move(coeffs)};
}

using Spectrum = EigenSpectrum<double>;
using Constants = EigenConstants<double>;
using Series = SeriesFunction<double>;

}  // namespace sesgp
