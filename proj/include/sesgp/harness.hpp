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
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sesgp/eigenexpansion.hpp"
#include "sesgp/inference.hpp"
#include "sesgp/prior.hpp"
#include "sesgp/rkhs.hpp"

namespace sesgp {

struct TruthSpec {
  enum class Construction { cosine_series, fourier_decay };
  int d0 = 2;
  SmoothnessSpec smoothness{1.0, 1.4, 2};
  Construction construction = Construction::cosine_series;
  std::uint64_t seed = 1;
  double delta_floor = 0.05;
  double xi = 1.0;
  /// Frequency shells (cosine_series) or frequency draws / shells (fourier_decay).
  int shells = 6;
  int directions = 6;
  double shell_spacing = 0.5;
  /// Target L2(Q) standard deviation of f0.
  double amplitude = 1.0;
  /// Monte Carlo size for the signal-strength estimate.
  int delta_mc = 20000;
};

/// f0(x) = sum_k c_k cos(<omega_k, x> + b_k) on R^{d0}.
class CosineTruth {
 public:
  CosineTruth() = default;
  CosineTruth(Eigen::MatrixXd omega, Eigen::VectorXd phase, Eigen::VectorXd coef)
      : omega_(std::move(omega)), phase_(std::move(phase)), coef_(std::move(coef)) {}

  int d0() const { return static_cast<int>(omega_.cols()); }
  int terms() const { return static_cast<int>(omega_.rows()); }
  const Eigen::MatrixXd& omega() const { return omega_; }
  const Eigen::VectorXd& phase() const { return phase_; }
  const Eigen::VectorXd& coef() const { return coef_; }

  template <typename Derived>
  double operator()(const Eigen::MatrixBase<Derived>& x) const {
    return (coef_.array() * ((omega_ * x).array() + phase_.array()).cos()).sum();
  }

  /// Average of f0 over coordinate j ~ N(0, xi^2): the cosine factor picks up exp(-omega_j^2 xi^2 / 2).
  template <typename Derived>
  double projection(const Eigen::MatrixBase<Derived>& x, int j, double xi) const {
    Eigen::VectorXd z = x;
    z[j] = 0;
    const Eigen::ArrayXd damp = (-0.5 * xi * xi * omega_.col(j).array().square()).exp();
    return (coef_.array() * damp * ((omega_ * z).array() + phase_.array()).cos()).sum();
  }

 private:
  Eigen::MatrixXd omega_;
  Eigen::VectorXd phase_;
  Eigen::VectorXd coef_;
};

struct Truth {
  CosineTruth f0;
  double xi = 1.0;
  /// Minimum over relevant coordinates of ||f0 - f0_j||^2, with Monte Carlo error.
  double delta_hat = 0;
  double delta_std_err = 0;
  std::vector<double> delta_per_coordinate;
  int redraws = 0;

  /// gamma* placing the d0 relevant inputs at coordinates 0..d0-1 of R^{d_n}.
  SparsityPattern gamma_star(int d_n) const;
  /// f* = T_{gamma*} f0 evaluated at a full design point.
  double operator()(const Eigen::VectorXd& x) const { return f0(x.head(f0.d0())); }
};

/// Signal strength per coordinate ||f - f_j||^2_{L2(N(0, xi^2 I))} by Monte Carlo; `projection(x, j)` averages out coordinate j.
struct SignalStrength {
  std::vector<double> per_coordinate;
  std::vector<double> std_err;
};
SignalStrength estimate_signal_strength(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const std::function<double(const Eigen::VectorXd&, int)>& projection,
                                        int d0, double xi, int n_mc, std::uint64_t seed);

/// Builds f0, estimates delta and redraws (up to 50 times) until delta_hat >= delta_floor.
Truth make_truth(const TruthSpec& spec);

/// X ~ N(0, xi^2 I_{d_n}) rows, y = f*(X) + sigma Z.
Dataset generate_dataset(const Truth& truth, const DesignSpec& design, int n, double sigma, std::uint64_t seed);

struct DimensionRule {
  enum class Kind { fixed, growth };
  Kind kind = Kind::fixed;
  int fixed = 8;
  /// growth: d_n = ceil(c exp(n^{d0/(2 beta + d0)})), capped at `cap`.
  double c = 1.0;
  int cap = 64;

  int operator()(int n, const SmoothnessSpec& s) const;
};

/// Constant in log d_n <= kDimensionGrowthConstant n^{d0/(2 beta + d0)}.
inline constexpr double kDimensionGrowthConstant = 1.0;

struct ExperimentPlan {
  std::vector<int> n_grid{60, 120, 240, 480};
  DimensionRule d_rule;
  int replications = 10;
  int chains = 4;
  int iters = 10000;
  int burn_in = 2000;
  std::uint64_t seed = 20240101;
  double sigma = 0.5;
  double xi = 1.0;
  int eval_points = 10000;
  int max_states = 200;
  PriorConfig prior;
  TruthSpec truth;
};

/// Minimax rate n^{-beta/(2 beta + d0)} and the contraction radius with (log n)^kappa.
double minimax_rate(int n, const SmoothnessSpec& s);
double contraction_radius(int n, const SmoothnessSpec& s);

struct ResultRow {
  int n = 0;
  int d_n = 0;
  int replication = 0;
  std::uint64_t seed = 0;
  double prob_true_model = 0;
  double fp_mass = 0;
  double fn_mass = 0;
  double other_mass = 0;
  double l2_error = 0;
  double eps_n = 0;
  double minimax = 0;
  double q_d0 = 0;
  double delta_hat = 0;
  double seconds = 0;
  std::string config_hash;
};

using ResultTable = std::vector<ResultRow>;

/// FNV-1a of the canonical JSON form of the plan.
std::string config_hash(const ExperimentPlan& plan);

/// Runs every (n, replication) cell on a bounded worker pool. Rows are appended to
/// `csv_path` (when given) as cells finish; failed cells are logged and skipped.
ResultTable run_consistency(const ExperimentPlan& plan, const Truth& truth,
                            const std::optional<std::filesystem::path>& csv_path = std::nullopt,
                            std::function<void(const std::string&)> log = {});

struct SlopeFit {
  double slope = 0;
  double intercept = 0;
  double ci_low = 0;
  double ci_high = 0;
  int grid_points = 0;
};

/// Least-squares slope of log l2_error on log n with a stratified bootstrap CI.
SlopeFit contraction_slope(const ResultTable& table, int bootstrap = 2000, std::uint64_t seed = 7,
                           double level = 0.95);

struct TrendRow {
  int n = 0;
  double median_prob_true = 0;
  double median_fp_mass = 0;
  double median_fn_mass = 0;
  double median_l2_error = 0;
  int rows = 0;
};

/// Per-n medians, ordered by n.
std::vector<TrendRow> trend_summary(const ResultTable& table);

void write_result_header(std::ostream& out);
void write_result_row(std::ostream& out, const ResultRow& row);
ResultTable read_result_csv(const std::filesystem::path& path);

}  // namespace sesgp
