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

#include "sesgp/inference.hpp"

#include <algorithm>
#include <future>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace sesgp {

void Dataset::validate() const {
  if (X.rows() < 1) throw DomainError("Dataset: need at least one observation");
  if (y.size() != X.rows()) throw DomainError("Dataset: X and y row counts differ");
  if (!X.allFinite() || !y.allFinite()) throw DomainError("Dataset: non-finite entries");
  if (!(sigma > 0) || !std::isfinite(sigma)) throw DomainError("Dataset: sigma must be positive");
}

Eigen::MatrixXd kernel_matrix(const SparsityPattern& gamma, double a, const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& B) {
  if (A.cols() != gamma.dim() || B.cols() != gamma.dim())
    throw DomainError("kernel_matrix: point dimension does not match the pattern");
  const std::vector<int> coords = gamma.indices();
  const auto g = static_cast<Eigen::Index>(coords.size());
  // Selected coordinates, one point per column for contiguous access.
  Eigen::MatrixXd As(g, A.rows());
  Eigen::MatrixXd Bs(g, B.rows());
  for (Eigen::Index k = 0; k < g; ++k) {
    As.row(k) = A.col(coords[static_cast<std::size_t>(k)]).transpose();
    Bs.row(k) = B.col(coords[static_cast<std::size_t>(k)]).transpose();
  }
  const bool symmetric = &A == &B;
  Eigen::MatrixXd sq(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    const Eigen::Index start = symmetric ? j : 0;
    for (Eigen::Index i = start; i < A.rows(); ++i) {
      double s = 0;
      for (Eigen::Index k = 0; k < g; ++k) {
        const double d = As(k, i) - Bs(k, j);
        s += d * d;
      }
      sq(i, j) = s;
    }
  }
  if (symmetric) sq.triangularView<Eigen::StrictlyUpper>() = sq.transpose();
  return (-(a * a) * sq.array()).exp().matrix();
}

Eigen::LLT<Eigen::MatrixXd> factorize_covariance(Eigen::MatrixXd covariance) {
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() == Eigen::Success) return llt;
  for (double jitter = 1e-10; jitter <= 1e-6 * 1.0001; jitter *= 10) {
    Eigen::MatrixXd jittered = covariance;
    jittered.diagonal().array() += jitter;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) return llt;
  }
  std::ostringstream msg;
  msg << "Cholesky failed after jitter 1e-6: covariance of size " << covariance.rows()
      << " is not numerically positive definite (min diagonal " << covariance.diagonal().minCoeff() << ")";
  throw NumericalError(msg.str());
}

namespace {

// Lower triangle of K_{a,gamma}(X, X) + sigma^2 I; LLT never reads the upper one.
Eigen::MatrixXd covariance_lower(const Dataset& data, const SparsityPattern& gamma, double a) {
  const Eigen::Index n = data.n();
  const std::vector<int> coords = gamma.indices();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    auto col = K.col(j).tail(n - j);
    col.setZero();
    for (int k : coords) col.array() += (data.X.col(k).tail(n - j).array() - data.X(j, k)).square();
    col = (-(a * a) * col.array()).exp().matrix();
    K(j, j) += data.sigma * data.sigma;
  }
  return K;
}

Eigen::LLT<Eigen::MatrixXd> factorize(const Dataset& data, const SparsityPattern& gamma, double a) {
  data.validate();
  if (data.n() > kMaxFitSize) throw DomainError("marginal likelihood: n exceeds the dense Cholesky limit");
  if (!(a > 0)) throw DomainError("marginal likelihood: a must be positive");
  return factorize_covariance(covariance_lower(data, gamma, a));
}

}  // namespace

double log_marginal_likelihood(const Dataset& data, const SparsityPattern& gamma, double a) {
  const auto llt = factorize(data, gamma, a);
  const Eigen::VectorXd z = llt.matrixL().solve(data.y);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * z.squaredNorm() - 0.5 * log_det - 0.5 * data.n() * std::log(2 * std::numbers::pi);
}

Eigen::VectorXd conditional_mean_weights(const Dataset& data, const SparsityPattern& gamma, double a) {
  return factorize(data, gamma, a).solve(data.y);
}

double MarginalLikelihoodCache::operator()(const SparsityPattern& gamma, double log_a) {
  Key key{gamma, std::llround(log_a * 1e12)};
  if (auto it = cache_.find(key); it != cache_.end()) {
    ++hits_;
    return it->second;
  }
  ++misses_;
  const double value = log_marginal_likelihood(*data_, gamma, std::exp(log_a));
  if (cache_.size() >= capacity_) cache_.clear();
  cache_.emplace(std::move(key), value);
  return value;
}

double log_joint_prior(const Eigen::VectorXd& size_pmf, const RescalingPriorConfig& rescaling,
                       const SparsityPattern& gamma, double log_a) {
  const double log_gamma = log_pattern_prior(size_pmf, gamma.cardinality());
  if (!std::isfinite(log_gamma)) return -std::numeric_limits<double>::infinity();
  const double log_pi = rescaling_log_density(rescaling, std::max(1, gamma.cardinality()), std::exp(log_a));
  return log_gamma + log_pi + log_a;
}

Trace mcmc_run(const Dataset& data, const PriorConfig& prior, const McmcOptions& options) {
  data.validate();
  if (options.iters < 1) throw DomainError("mcmc_run: iters must be >= 1");
  const double p_total = options.p_add + options.p_remove + options.p_swap + options.p_rescale;
  if (!(p_total > 0)) throw DomainError("mcmc_run: move probabilities must not all be zero");
  const int d = data.dim();
  SparsityPriorConfig size_cfg = prior.size;
  size_cfg.d_n = d;
  size_cfg.n = std::max(3, data.n());
  const Eigen::VectorXd pmf = size_prior_pmf(size_cfg);
  const RescalingPriorConfig& rescaling = prior.rescaling;

  MarginalLikelihoodCache marginal(data);
  Rng rng = make_rng(options.seed, options.stream);

  auto log_target = [&](ChainState& s) {
    s.log_prior = log_joint_prior(pmf, rescaling, s.gamma, s.log_a);
    if (!std::isfinite(s.log_prior)) {
      s.log_marginal = -std::numeric_limits<double>::infinity();
      return s.log_prior;
    }
    s.log_marginal = marginal(s.gamma, s.log_a);
    return s.log_marginal + s.log_prior;
  };

  ChainState state;
  state.gamma = options.initial_gamma.value_or(SparsityPattern(d));
  if (state.gamma.dim() != d) throw DomainError("mcmc_run: initial pattern has the wrong dimension");
  state.log_a = std::log(options.initial_a.value_or(2.0 * rescaling.lower()));
  double current = log_target(state);
  if (!std::isfinite(current)) throw DomainError("mcmc_run: initial state has zero prior density");

  const double w_add = options.p_add / p_total;
  const double w_remove = options.p_remove / p_total;
  const double w_swap = options.p_swap / p_total;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;

  auto pick = [&](const SparsityPattern& g, bool included) {
    const int count = included ? g.cardinality() : g.dim() - g.cardinality();
    int k = std::uniform_int_distribution<int>(0, count - 1)(rng);
    for (int i = 0; i < g.dim(); ++i) {
      if (g.test(i) == included && k-- == 0) return i;
    }
    return -1;
  };

  Trace trace;
  trace.reserve(static_cast<std::size_t>(options.iters));
  for (int iter = 1; iter <= options.iters; ++iter) {
    const double u = unif(rng);
    const Move move = u < w_add                        ? Move::add
                      : u < w_add + w_remove           ? Move::remove
                      : u < w_add + w_remove + w_swap  ? Move::swap
                                                       : Move::rescale;
    auto propose = [&](const ChainState& s, Rng&) {
      Proposal<ChainState> p{s, 0.0};
      const int g = s.gamma.cardinality();
      switch (move) {
        case Move::add:
          if (g == d) break;
          p.state.gamma.set(pick(s.gamma, false));
          p.log_proposal_ratio = std::log(options.p_remove / (g + 1)) - std::log(options.p_add / (d - g));
          break;
        case Move::remove:
          if (g == 0) break;
          p.state.gamma.set(pick(s.gamma, true), false);
          p.log_proposal_ratio = std::log(options.p_add / (d - g + 1)) - std::log(options.p_remove / g);
          break;
        case Move::swap:
          if (g == 0 || g == d) break;
          p.state.gamma.set(pick(s.gamma, true), false);
          p.state.gamma.set(pick(s.gamma, false), true);
          break;
        case Move::rescale:
          p.state.log_a = s.log_a + options.rescale_step * normal(rng);
          break;
      }
      return p;
    };
    const bool accepted = metropolis_step(state, current, propose, log_target, rng);
    if (options.audit_every > 0 && iter % options.audit_every == 0) {
      const double fresh = log_marginal_likelihood(data, state.gamma, std::exp(state.log_a));
      if (std::abs(fresh - state.log_marginal) > 1e-8) {
        std::ostringstream msg;
        msg << "mcmc_run: cached marginal " << state.log_marginal << " differs from recomputation " << fresh;
        throw NumericalError(msg.str());
      }
    }
    trace.push_back({iter, state, move, accepted});
  }
  return trace;
}

std::vector<Trace> run_chains(const Dataset& data, const PriorConfig& prior, const McmcOptions& options,
                              int n_chains) {
  if (n_chains < 1) throw DomainError("run_chains: need at least one chain");
  std::vector<Trace> traces(static_cast<std::size_t>(n_chains));
  const int workers = std::min(worker_count(), n_chains);
  auto run_one = [&](int c) {
    McmcOptions opt = options;
    opt.stream = static_cast<std::uint64_t>(c);
    traces[static_cast<std::size_t>(c)] = mcmc_run(data, prior, opt);
  };
  if (workers <= 1) {
    for (int c = 0; c < n_chains; ++c) run_one(c);
    return traces;
  }
  std::vector<std::future<void>> jobs;
  for (int w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (int c = w; c < n_chains; c += workers) run_one(c);
    }));
  }
  for (auto& j : jobs) j.get();
  return traces;
}

ModelClass classify(const SparsityPattern& gamma, const SparsityPattern& truth) {
  if (gamma == truth) return ModelClass::true_model;
  if (!truth.is_subset_of(gamma)) return ModelClass::false_negative;
  if (gamma.cardinality() > truth.cardinality()) return ModelClass::false_positive;
  return ModelClass::other;
}

namespace {

std::vector<const ChainState*> post_burn_in(std::span<const Trace> traces, std::size_t burn_in) {
  std::vector<const ChainState*> states;
  for (const auto& t : traces) {
    if (burn_in >= t.size()) throw DomainError("burn_in must be shorter than every trace");
    for (std::size_t i = burn_in; i < t.size(); ++i) states.push_back(&t[i].state);
  }
  return states;
}

}  // namespace

PosteriorSummary summarize(std::span<const Trace> traces, std::size_t burn_in,
                           const std::optional<SparsityPattern>& truth, std::size_t top_k) {
  if (traces.empty()) throw DomainError("summarize: no traces");
  const auto states = post_burn_in(traces, burn_in);
  const int d = states.front()->gamma.dim();
  PosteriorSummary out;
  out.n_states = states.size();
  out.inclusion_probs = Eigen::VectorXd::Zero(d);
  std::unordered_map<SparsityPattern, std::size_t, SparsityPatternHash> counts;
  for (const auto* s : states) {
    ++counts[s->gamma];
    for (int i = 0; i < d; ++i)
      if (s->gamma.test(i)) out.inclusion_probs[i] += 1;
  }
  const double total = static_cast<double>(states.size());
  out.inclusion_probs /= total;

  std::vector<std::pair<SparsityPattern, double>> models;
  models.reserve(counts.size());
  for (const auto& [g, c] : counts) models.emplace_back(g, static_cast<double>(c) / total);
  std::sort(models.begin(), models.end(), [](const auto& l, const auto& r) {
    if (l.second != r.second) return l.second > r.second;
    return l.first < r.first;
  });
  if (models.size() > top_k) models.resize(top_k);
  out.top_models = std::move(models);

  if (truth) {
    if (truth->dim() != d) throw DomainError("summarize: truth has the wrong dimension");
    double mass[4] = {0, 0, 0, 0};
    for (const auto& [g, c] : counts) mass[static_cast<int>(classify(g, *truth))] += static_cast<double>(c);
    out.prob_true_model = mass[0] / total;
    out.fp_mass = mass[1] / total;
    out.fn_mass = mass[2] / total;
    out.other_mass = mass[3] / total;
  }
  return out;
}

Eigen::VectorXd posterior_mean_predict(std::span<const Trace> traces, const Dataset& data,
                                       const Eigen::MatrixXd& x_new, std::size_t burn_in, std::size_t max_states) {
  if (max_states < 1) throw DomainError("posterior_mean_predict: max_states must be >= 1");
  const auto states = post_burn_in(traces, burn_in);
  std::vector<const ChainState*> used;
  if (states.size() <= max_states) {
    used = states;
  } else {
    for (std::size_t k = 0; k < max_states; ++k) used.push_back(states[k * states.size() / max_states]);
  }
  std::map<std::pair<SparsityPattern, double>, std::size_t> groups;
  for (const auto* s : used) ++groups[{s->gamma, s->log_a}];
  Eigen::VectorXd pred = Eigen::VectorXd::Zero(x_new.rows());
  for (const auto& [key, count] : groups) {
    const double a = std::exp(key.second);
    const Eigen::VectorXd alpha = conditional_mean_weights(data, key.first, a);
    pred += (static_cast<double>(count) / static_cast<double>(used.size())) *
            (kernel_matrix(key.first, a, x_new, data.X) * alpha);
  }
  return pred;
}

double l2_error_of_mean(std::span<const Trace> traces, const Dataset& data, std::size_t burn_in,
                        const std::function<double(const Eigen::VectorXd&)>& truth, double xi, int n_eval,
                        std::uint64_t seed, std::size_t max_states) {
  if (n_eval < 1) throw DomainError("l2_error_of_mean: n_eval must be >= 1");
  Rng rng = make_rng(seed, 0x12e5);
  std::normal_distribution<double> normal(0.0, xi);
  Eigen::MatrixXd X(n_eval, data.dim());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = normal(rng);
  const Eigen::VectorXd pred = posterior_mean_predict(traces, data, X, burn_in, max_states);
  double sq = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double r = pred[i] - truth(X.row(i).transpose());
    sq += r * r;
  }
  return std::sqrt(sq / n_eval);
}

double projection_loss(const BatchFunction& fbar, const Eigen::MatrixXd& design, const SparsityPattern& gamma,
                       const Eigen::MatrixXd& draws) {
  if (design.cols() != gamma.dim() || draws.cols() != gamma.dim())
    throw DomainError("projection_loss: dimension mismatch");
  if (gamma.cardinality() == gamma.dim()) return 0.0;
  const Eigen::Index n = design.rows();
  const Eigen::Index m = draws.rows();
  Eigen::MatrixXd points(n * m, design.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < m; ++k) {
      auto row = points.row(i * m + k);
      for (int j = 0; j < gamma.dim(); ++j) row(j) = gamma.test(j) ? design(i, j) : draws(k, j);
    }
  }
  const Eigen::VectorXd full = fbar(design);
  const Eigen::VectorXd partial = fbar(points);
  double loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double proj = partial.segment(i * m, m).mean();
    loss += (full[i] - proj) * (full[i] - proj);
  }
  return loss / static_cast<double>(n);
}

SparsityPattern decoupled_select(const BatchFunction& fbar, const Eigen::MatrixXd& design,
                                 std::span<const SparsityPattern> candidates, const DecoupledSelectOptions& options) {
  if (candidates.empty()) throw DomainError("decoupled_select: empty candidate set");
  if (options.mc_draws < 1) throw DomainError("decoupled_select: mc_draws must be >= 1");
  Rng rng = make_rng(options.seed, 0xdec0);
  std::normal_distribution<double> normal(0.0, options.xi);
  Eigen::MatrixXd draws(options.mc_draws, design.cols());
  for (Eigen::Index i = 0; i < draws.rows(); ++i)
    for (Eigen::Index j = 0; j < draws.cols(); ++j) draws(i, j) = normal(rng);

  const SparsityPattern* best = nullptr;
  double best_value = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    const double value =
        projection_loss(fbar, design, c, draws) + options.lambda * options.penalty(c.cardinality());
    bool better = false;
    if (best == nullptr) {
      better = true;
    } else {
      const double tol = 1e-12 * std::max(1.0, std::abs(best_value));
      if (value < best_value - tol) {
        better = true;
      } else if (value <= best_value + tol) {
        better = c.cardinality() < best->cardinality() || (c.cardinality() == best->cardinality() && c < *best);
      }
    }
    if (better) {
      best = &c;
      best_value = value;
    }
  }
  return *best;
}

std::vector<SparsityPattern> default_candidates(std::span<const Trace> traces, std::size_t burn_in) {
  const auto summary = summarize(traces, burn_in, std::nullopt, 1);
  std::set<SparsityPattern> out;
  for (const auto* s : post_burn_in(traces, burn_in)) out.insert(s->gamma);
  const SparsityPattern& top = summary.top_models.front().first;
  const std::vector<int> idx = top.indices();
  if (idx.size() <= 12) {
    for (std::uint32_t mask = 0; mask < (1u << idx.size()); ++mask) {
      SparsityPattern sub(top.dim());
      for (std::size_t b = 0; b < idx.size(); ++b)
        if ((mask >> b) & 1u) sub.set(idx[b]);
      out.insert(sub);
    }
  } else {
    for (int i : idx) {
      SparsityPattern sub = top;
      sub.set(i, false);
      out.insert(sub);
    }
  }
  return {out.begin(), out.end()};
}

double estimate_sigma_pilot(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double xi) {
  const double sd = std::sqrt((y.array() - y.mean()).square().mean());
  if (!(sd > 0)) throw DomainError("estimate_sigma_pilot: constant response");
  const SparsityPattern full = SparsityPattern::full(static_cast<int>(X.cols()));
  const double base = std::max(1.0 / xi, 1.0);
  double best = -std::numeric_limits<double>::infinity();
  Dataset best_data;
  double best_a = base;
  for (double a_mult : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    for (double s_mult : {0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0}) {
      Dataset d{X, y, sd * s_mult};
      const double v = log_marginal_likelihood(d, full, base * a_mult);
      if (v > best) {
        best = v;
        best_data = d;
        best_a = base * a_mult;
      }
    }
  }
  const Eigen::VectorXd alpha = conditional_mean_weights(best_data, full, best_a);
  const Eigen::VectorXd residual = best_data.sigma * best_data.sigma * alpha;
  return std::sqrt(residual.squaredNorm() / static_cast<double>(y.size()));
}

}  // namespace sesgp
