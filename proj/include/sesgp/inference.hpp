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
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sesgp/eigenexpansion.hpp"
#include "sesgp/prior.hpp"

namespace sesgp {

/// Regression data y_i = f(X_i) + sigma eps_i with known sigma.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  double sigma = 1.0;

  int n() const { return static_cast<int>(X.rows()); }
  int dim() const { return static_cast<int>(X.cols()); }
  /// Throws DomainError on shape mismatch, non-finite entries or sigma <= 0.
  void validate() const;
};

/// Largest n accepted by the dense Cholesky path.
inline constexpr int kMaxFitSize = 2000;

/// K_{a,gamma}(A, B) for row-wise point sets.
Eigen::MatrixXd kernel_matrix(const SparsityPattern& gamma, double a, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Cholesky factor of K + sigma^2 I, escalating diagonal jitter 1e-10 .. 1e-6 on failure.
Eigen::LLT<Eigen::MatrixXd> factorize_covariance(Eigen::MatrixXd covariance);

/// log N(y; 0, K_{a,gamma}(X, X) + sigma^2 I). The empty pattern gives K = 1 1^T.
double log_marginal_likelihood(const Dataset& data, const SparsityPattern& gamma, double a);

/// (K + sigma^2 I)^{-1} y, the weights of the GP conditional mean.
Eigen::VectorXd conditional_mean_weights(const Dataset& data, const SparsityPattern& gamma, double a);

/// Memoized log marginal keyed by (gamma, log a quantized at 1e-12).
class MarginalLikelihoodCache {
 public:
  explicit MarginalLikelihoodCache(const Dataset& data, std::size_t capacity = 200000)
      : data_(&data), capacity_(capacity) {}

  double operator()(const SparsityPattern& gamma, double log_a);
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  struct Key {
    SparsityPattern gamma;
    long long log_a_q;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return SparsityPatternHash{}(k.gamma) ^ (std::hash<long long>{}(k.log_a_q) * 0x9e3779b97f4a7c15ULL);
    }
  };
  const Dataset* data_;
  std::size_t capacity_;
  std::unordered_map<Key, double, KeyHash> cache_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Accept with probability min(1, exp(log_ratio)).
template <typename Generator>
bool metropolis_accept(double log_ratio, Generator& rng) {
  if (log_ratio >= 0) return true;
  if (std::isnan(log_ratio)) return false;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return std::log(unif(rng)) < log_ratio;
}

/// A proposal together with log q(current | proposal) - log q(proposal | current).
template <typename State>
struct Proposal {
  State state;
  double log_proposal_ratio = 0;
};

/// One Metropolis-Hastings transition. `propose(state, rng)` returns a Proposal,
/// `log_target(state)` the unnormalized log target. Returns true on acceptance.
template <typename State, typename Propose, typename LogTarget, typename Generator>
bool metropolis_step(State& state, double& log_target_value, Propose&& propose, LogTarget&& log_target,
                     Generator& rng) {
  Proposal<State> p = propose(state, rng);
  const double proposed = log_target(p.state);
  if (!metropolis_accept(proposed - log_target_value + p.log_proposal_ratio, rng)) return false;
  state = std::move(p.state);
  log_target_value = proposed;
  return true;
}

enum class Move { add, remove, swap, rescale };

struct ChainState {
  SparsityPattern gamma;
  double log_a = 0;
  double log_marginal = 0;
  double log_prior = 0;
};

struct TraceRow {
  int iter = 0;
  ChainState state;
  Move move = Move::rescale;
  bool accepted = false;
};

using Trace = std::vector<TraceRow>;

struct McmcOptions {
  int iters = 10000;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  double p_add = 0.25;
  double p_remove = 0.25;
  double p_swap = 0.20;
  double p_rescale = 0.30;
  double rescale_step = 0.3;
  /// Recompute the cached marginal every `audit_every` iterations (0 disables).
  int audit_every = 1000;
  std::optional<SparsityPattern> initial_gamma;
  std::optional<double> initial_a;
};

/// log q_n(|gamma|) - log binom(d_n, |gamma|) + log pi(a) + log a. The empty
/// pattern borrows the d = 1 rescaling law for its unidentified a.
double log_joint_prior(const Eigen::VectorXd& size_pmf, const RescalingPriorConfig& rescaling,
                       const SparsityPattern& gamma, double log_a);

/// Metropolis-Hastings over (gamma, log a) with add / remove / swap / rescale moves.
Trace mcmc_run(const Dataset& data, const PriorConfig& prior, const McmcOptions& options);

/// Independent chains; chain c uses stream c of `options.seed`.
std::vector<Trace> run_chains(const Dataset& data, const PriorConfig& prior, const McmcOptions& options,
                              int n_chains);

enum class ModelClass { true_model, false_positive, false_negative, other };

/// false_positive: strict superset of truth; false_negative: misses a true coordinate.
ModelClass classify(const SparsityPattern& gamma, const SparsityPattern& truth);

struct PosteriorSummary {
  Eigen::VectorXd inclusion_probs;
  std::vector<std::pair<SparsityPattern, double>> top_models;
  std::size_t n_states = 0;
  std::optional<double> prob_true_model;
  std::optional<double> fp_mass;
  std::optional<double> fn_mass;
  std::optional<double> other_mass;
  std::optional<double> l2_error_of_mean;
};

/// Frequencies over post-burn-in states of every trace.
PosteriorSummary summarize(std::span<const Trace> traces, std::size_t burn_in,
                           const std::optional<SparsityPattern>& truth = std::nullopt, std::size_t top_k = 10);

/// Average over post-burn-in states of K(x_new, X) (K + sigma^2 I)^{-1} y. At most
/// `max_states` evenly spaced states are used; repeated states are solved once.
Eigen::VectorXd posterior_mean_predict(std::span<const Trace> traces, const Dataset& data,
                                       const Eigen::MatrixXd& x_new, std::size_t burn_in,
                                       std::size_t max_states = 200);

/// ||posterior mean - truth||_{L2(Q)} by Monte Carlo over `n_eval` fresh N(0, xi^2 I) points.
double l2_error_of_mean(std::span<const Trace> traces, const Dataset& data, std::size_t burn_in,
                        const std::function<double(const Eigen::VectorXd&)>& truth, double xi, int n_eval,
                        std::uint64_t seed, std::size_t max_states = 200);

/// Batch evaluator: one value per row of its argument.
using BatchFunction = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

struct DecoupledSelectOptions {
  double lambda = 0.0;
  std::function<double(int)> penalty = [](int k) { return static_cast<double>(k); };
  double xi = 1.0;
  int mc_draws = 64;
  std::uint64_t seed = 1;
};

/// Projection loss mean_i (fbar(x_i) - fbar_gamma(x_i))^2 where fbar_gamma averages
/// fbar over fresh Gaussian draws of the excluded coordinates.
double projection_loss(const BatchFunction& fbar, const Eigen::MatrixXd& design, const SparsityPattern& gamma,
                       const Eigen::MatrixXd& draws);

/// argmin over candidates of projection loss + lambda J(|gamma|); ties go to smaller
/// |gamma|, then the lexicographically smaller bit vector.
SparsityPattern decoupled_select(const BatchFunction& fbar, const Eigen::MatrixXd& design,
                                 std::span<const SparsityPattern> candidates, const DecoupledSelectOptions& options);

/// Visited patterns plus every sub-pattern of the most frequent one (single deletions above 12 coordinates).
std::vector<SparsityPattern> default_candidates(std::span<const Trace> traces, std::size_t burn_in);

/// Off-model plug-in noise level: residual RMS of the best full-pattern GP on an (a, sigma) grid.
double estimate_sigma_pilot(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double xi);

}  // namespace sesgp
