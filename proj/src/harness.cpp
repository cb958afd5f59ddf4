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

#include "sesgp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "sesgp/config.hpp"

namespace sesgp {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Var of sum_k c_k cos(<w_k, X> + b_k) under X ~ N(0, xi^2 I), in closed form.
double cosine_series_variance(const Eigen::MatrixXd& omega, const Eigen::VectorXd& phase, const Eigen::VectorXd& coef,
                              double xi) {
  const Eigen::Index K = omega.rows();
  const double s2 = xi * xi;
  double mean = 0;
  double second = 0;
  for (Eigen::Index k = 0; k < K; ++k) {
    mean += coef[k] * std::cos(phase[k]) * std::exp(-0.5 * s2 * omega.row(k).squaredNorm());
    for (Eigen::Index l = 0; l < K; ++l) {
      const double minus = std::exp(-0.5 * s2 * (omega.row(k) - omega.row(l)).squaredNorm());
      const double plus = std::exp(-0.5 * s2 * (omega.row(k) + omega.row(l)).squaredNorm());
      second += coef[k] * coef[l] * 0.5 * (std::cos(phase[k] - phase[l]) * minus + std::cos(phase[k] + phase[l]) * plus);
    }
  }
  return second - mean * mean;
}

Eigen::VectorXd random_direction(int d0, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd u(d0);
  do {
    for (int i = 0; i < d0; ++i) u[i] = normal(rng);
  } while (u.norm() < 1e-12);
  return u.normalized();
}

CosineTruth build_cosine_truth(const TruthSpec& spec, Rng& rng) {
  const int d0 = spec.d0;
  const double r = spec.smoothness.alpha + 0.5 * d0;
  const int K = spec.shells * spec.directions;
  Eigen::MatrixXd omega(K, d0);
  Eigen::VectorXd phase(K);
  Eigen::VectorXd coef(K);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int k = 0;
  if (spec.construction == TruthSpec::Construction::cosine_series) {
    for (int s = 1; s <= spec.shells; ++s) {
      const double radius = s * spec.shell_spacing;
      const double offset = unif(rng);
      for (int m = 0; m < spec.directions; ++m, ++k) {
        Eigen::VectorXd dir;
        if (d0 == 1) {
          dir = Eigen::VectorXd::Ones(1);
        } else if (d0 == 2) {
          const double theta = std::numbers::pi * (m + offset) / spec.directions;
          dir = Eigen::Vector2d(std::cos(theta), std::sin(theta));
        } else {
          dir = random_direction(d0, rng);
        }
        omega.row(k) = radius * dir.transpose();
        phase[k] = 2 * std::numbers::pi * unif(rng);
        coef[k] = std::pow(1.0 + radius, -r);
      }
    }
  } else {
    // Frequencies drawn with radial density proportional to (1 + rho)^{-(r - d0 + 1)};
    // importance weights then reproduce the envelope (1 + |lambda|)^{-r}.
    const double shape = r - d0;
    for (; k < K; ++k) {
      const double rho = std::pow(1.0 - unif(rng), -1.0 / shape) - 1.0;
      omega.row(k) = rho * random_direction(d0, rng).transpose();
      phase[k] = 0.0;
      coef[k] = std::pow(rho / (1.0 + rho), d0 - 1);
    }
  }
  const double var = cosine_series_variance(omega, phase, coef, spec.xi);
  if (var > 0) coef *= spec.amplitude / std::sqrt(var);
  return {std::move(omega), std::move(phase), std::move(coef)};
}

}  // namespace

SparsityPattern Truth::gamma_star(int d_n) const {
  if (d_n < f0.d0()) throw DomainError("Truth::gamma_star: d_n below d0");
  SparsityPattern g(d_n);
  for (int i = 0; i < f0.d0(); ++i) g.set(i);
  return g;
}

SignalStrength estimate_signal_strength(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const std::function<double(const Eigen::VectorXd&, int)>& projection,
                                        int d0, double xi, int n_mc, std::uint64_t seed) {
  if (n_mc < 2) throw DomainError("estimate_signal_strength: need at least two draws");
  Rng rng = make_rng(seed, 0xde17a);
  std::normal_distribution<double> normal(0.0, xi);
  std::vector<double> sum(static_cast<std::size_t>(d0), 0.0);
  std::vector<double> sum_sq(static_cast<std::size_t>(d0), 0.0);
  Eigen::VectorXd x(d0);
  for (int i = 0; i < n_mc; ++i) {
    for (int j = 0; j < d0; ++j) x[j] = normal(rng);
    const double fx = f(x);
    for (int j = 0; j < d0; ++j) {
      const double r = fx - projection(x, j);
      sum[static_cast<std::size_t>(j)] += r * r;
      sum_sq[static_cast<std::size_t>(j)] += r * r * r * r;
    }
  }
  SignalStrength out;
  for (int j = 0; j < d0; ++j) {
    const double m = sum[static_cast<std::size_t>(j)] / n_mc;
    const double v = sum_sq[static_cast<std::size_t>(j)] / n_mc - m * m;
    out.per_coordinate.push_back(m);
    out.std_err.push_back(std::sqrt(std::max(0.0, v) / (n_mc - 1)));
  }
  return out;
}

Truth make_truth(const TruthSpec& spec) {
  if (spec.d0 < 1) throw DomainError("make_truth: d0 must be >= 1");
  if (spec.shells < 1 || spec.directions < 1) throw DomainError("make_truth: need at least one term");
  constexpr int kMaxRedraws = 50;
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    Rng rng = make_rng(spec.seed, static_cast<std::uint64_t>(attempt));
    Truth truth;
    truth.xi = spec.xi;
    truth.f0 = build_cosine_truth(spec, rng);
    truth.redraws = attempt;
    const auto& f0 = truth.f0;
    const auto strength = estimate_signal_strength(
        [&](const Eigen::VectorXd& x) { return f0(x); },
        [&](const Eigen::VectorXd& x, int j) { return f0.projection(x, j, spec.xi); }, spec.d0, spec.xi,
        spec.delta_mc, splitmix64(spec.seed + static_cast<std::uint64_t>(attempt)));
    truth.delta_per_coordinate = strength.per_coordinate;
    const auto it = std::min_element(strength.per_coordinate.begin(), strength.per_coordinate.end());
    truth.delta_hat = *it;
    truth.delta_std_err = strength.std_err[static_cast<std::size_t>(it - strength.per_coordinate.begin())];
    if (truth.delta_hat >= spec.delta_floor) return truth;
  }
  throw ConfigError("make_truth: signal strength stayed below delta_floor after 50 redraws; "
                    "increase the amplitude or lower delta_floor");
}

Dataset generate_dataset(const Truth& truth, const DesignSpec& design, int n, double sigma, std::uint64_t seed) {
  if (n < 1) throw DomainError("generate_dataset: n must be >= 1");
  if (design.dim < truth.f0.d0()) throw DomainError("generate_dataset: design dimension below d0");
  if (!(sigma >= 0)) throw DomainError("generate_dataset: sigma must be non-negative");
  Rng x_rng = make_rng(seed, 0);
  Rng e_rng = make_rng(seed, 1);
  std::normal_distribution<double> normal;
  Dataset data;
  data.X.resize(n, design.dim);
  data.y.resize(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < design.dim; ++j) data.X(i, j) = design.xi * normal(x_rng);
  for (int i = 0; i < n; ++i) data.y[i] = truth(data.X.row(i).transpose()) + sigma * normal(e_rng);
  // A noiseless dataset keeps sigma as a placeholder so it can still be validated downstream.
  data.sigma = sigma > 0 ? sigma : 1.0;
  return data;
}

int DimensionRule::operator()(int n, const SmoothnessSpec& s) const {
  if (kind == Kind::fixed) return fixed;
  const double rate = std::pow(static_cast<double>(n), s.d0 / (2 * s.beta + s.d0));
  const double d = std::ceil(c * std::exp(std::min(rate, 50.0)));
  return std::max(s.d0, static_cast<int>(std::min<double>(d, cap)));
}

double minimax_rate(int n, const SmoothnessSpec& s) {
  return std::pow(static_cast<double>(n), -s.beta / (2 * s.beta + s.d0));
}

double contraction_radius(int n, const SmoothnessSpec& s) {
  const double kappa = (s.d0 + 1) / (2 + s.d0 / s.beta);
  return minimax_rate(n, s) * std::pow(std::log(static_cast<double>(n)), kappa);
}

std::string config_hash(const ExperimentPlan& plan) {
  const std::string text = plan_to_json(plan).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

void write_result_header(std::ostream& out) {
  out << "n,d_n,replication,seed,prob_true_model,fp_mass,fn_mass,other_mass,l2_error,eps_n,minimax_rate,q_d0,"
         "delta_hat,seconds,config_hash\n";
}

void write_result_row(std::ostream& out, const ResultRow& r) {
  out << r.n << ',' << r.d_n << ',' << r.replication << ',' << r.seed << ',' << std::setprecision(10)
      << r.prob_true_model << ',' << r.fp_mass << ',' << r.fn_mass << ',' << r.other_mass << ',' << r.l2_error << ','
      << r.eps_n << ',' << r.minimax << ',' << r.q_d0 << ',' << r.delta_hat << ',' << r.seconds << ','
      << r.config_hash << '\n';
}

ResultTable read_result_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("read_result_csv: cannot open " + path.string());
  ResultTable table;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 15) throw ConfigError("read_result_csv: malformed row: " + line);
    ResultRow r;
    r.n = std::stoi(f[0]);
    r.d_n = std::stoi(f[1]);
    r.replication = std::stoi(f[2]);
    r.seed = std::stoull(f[3]);
    r.prob_true_model = std::stod(f[4]);
    r.fp_mass = std::stod(f[5]);
    r.fn_mass = std::stod(f[6]);
    r.other_mass = std::stod(f[7]);
    r.l2_error = std::stod(f[8]);
    r.eps_n = std::stod(f[9]);
    r.minimax = std::stod(f[10]);
    r.q_d0 = std::stod(f[11]);
    r.delta_hat = std::stod(f[12]);
    r.seconds = std::stod(f[13]);
    r.config_hash = f[14];
    table.push_back(r);
  }
  return table;
}

ResultTable run_consistency(const ExperimentPlan& plan, const Truth& truth,
                            const std::optional<std::filesystem::path>& csv_path,
                            std::function<void(const std::string&)> log) {
  if (plan.n_grid.empty() || plan.replications < 1) throw DomainError("run_consistency: empty plan");
  if (plan.burn_in >= plan.iters) throw DomainError("run_consistency: burn_in must be below iters");
  const std::string hash = config_hash(plan);
  const SmoothnessSpec& s = plan.truth.smoothness;

  std::ofstream csv;
  if (csv_path) {
    const bool fresh = !std::filesystem::exists(*csv_path) || std::filesystem::file_size(*csv_path) == 0;
    csv.open(*csv_path, std::ios::app);
    if (!csv) throw ConfigError("run_consistency: cannot open " + csv_path->string());
    if (fresh) write_result_header(csv);
    csv.flush();
  }

  struct Cell {
    int n;
    int rep;
  };
  std::vector<Cell> cells;
  for (int n : plan.n_grid)
    for (int rep = 0; rep < plan.replications; ++rep) cells.push_back({n, rep});

  ResultTable table;
  std::mutex mu;
  auto emit_log = [&](const std::string& msg) {
    if (log) log(msg);
  };

  auto run_cell = [&](const Cell& cell) {
    const auto start = std::chrono::steady_clock::now();
    const int d_n = plan.d_rule(cell.n, s);
    if (std::log(static_cast<double>(d_n)) >
        kDimensionGrowthConstant * std::pow(static_cast<double>(cell.n), s.d0 / (2 * s.beta + s.d0))) {
      throw DomainError("d_n violates the growth condition at n = " + std::to_string(cell.n));
    }
    const std::uint64_t cell_seed =
        splitmix64(plan.seed ^ splitmix64(static_cast<std::uint64_t>(cell.n) * 1000003ULL + cell.rep));
    const DesignSpec design{d_n, plan.xi};
    const Dataset data = generate_dataset(truth, design, cell.n, plan.sigma, cell_seed);

    McmcOptions opt;
    opt.iters = plan.iters;
    opt.seed = cell_seed;
    std::vector<Trace> traces;
    for (int c = 0; c < plan.chains; ++c) {
      opt.stream = static_cast<std::uint64_t>(c) + 1;
      traces.push_back(mcmc_run(data, plan.prior, opt));
    }
    const SparsityPattern gstar = truth.gamma_star(d_n);
    const auto burn = static_cast<std::size_t>(plan.burn_in);
    const auto summary = summarize(traces, burn, gstar);

    ResultRow row;
    row.n = cell.n;
    row.d_n = d_n;
    row.replication = cell.rep;
    row.seed = cell_seed;
    row.prob_true_model = *summary.prob_true_model;
    row.fp_mass = *summary.fp_mass;
    row.fn_mass = *summary.fn_mass;
    row.other_mass = *summary.other_mass;
    row.l2_error = l2_error_of_mean(traces, data, burn, [&](const Eigen::VectorXd& x) { return truth(x); }, plan.xi,
                                    plan.eval_points, cell_seed, static_cast<std::size_t>(plan.max_states));
    row.eps_n = contraction_radius(cell.n, s);
    row.minimax = minimax_rate(cell.n, s);
    SparsityPriorConfig q = plan.prior.size;
    q.d_n = d_n;
    q.n = cell.n;
    row.q_d0 = size_prior_pmf(q)[std::min(s.d0, d_n)];
    row.delta_hat = truth.delta_hat;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row.config_hash = hash;
    return row;
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& cell = cells[i];
      try {
        ResultRow row = run_cell(cell);
        std::lock_guard<std::mutex> lock(mu);
        if (csv.is_open()) {
          write_result_row(csv, row);
          csv.flush();
        }
        std::ostringstream msg;
        msg << "n=" << row.n << " rep=" << row.replication << " P(true)=" << row.prob_true_model
            << " fp=" << row.fp_mass << " fn=" << row.fn_mass << " l2=" << row.l2_error << " (" << row.seconds
            << " s)";
        emit_log(msg.str());
        table.push_back(std::move(row));
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        emit_log("cell n=" + std::to_string(cell.n) + " rep=" + std::to_string(cell.rep) + " failed: " + e.what());
      }
    }
  };
  const int workers = std::max(1, std::min<int>(worker_count(), static_cast<int>(cells.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::future<void>> jobs;
    for (int w = 0; w < workers; ++w) jobs.push_back(std::async(std::launch::async, worker));
    for (auto& j : jobs) j.get();
  }
  std::sort(table.begin(), table.end(),
            [](const ResultRow& l, const ResultRow& r) { return std::tie(l.n, l.replication) < std::tie(r.n, r.replication); });
  return table;
}

namespace {

std::pair<double, double> ols(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

SlopeFit contraction_slope(const ResultTable& table, int bootstrap, std::uint64_t seed, double level) {
  std::map<int, std::vector<double>> groups;
  for (const auto& r : table)
    if (r.l2_error > 0 && std::isfinite(r.l2_error)) groups[r.n].push_back(std::log(r.l2_error));
  if (groups.size() < 3) throw DomainError("contraction_slope: need at least three distinct n");
  std::vector<double> x, y;
  for (const auto& [n, logs] : groups)
    for (double v : logs) {
      x.push_back(std::log(static_cast<double>(n)));
      y.push_back(v);
    }
  SlopeFit fit;
  std::tie(fit.slope, fit.intercept) = ols(x, y);
  fit.grid_points = static_cast<int>(groups.size());

  Rng rng = make_rng(seed, 0xb007);
  std::vector<double> slopes;
  slopes.reserve(static_cast<std::size_t>(bootstrap));
  for (int b = 0; b < bootstrap; ++b) {
    std::vector<double> bx, by;
    for (const auto& [n, logs] : groups) {
      std::uniform_int_distribution<std::size_t> pick(0, logs.size() - 1);
      for (std::size_t i = 0; i < logs.size(); ++i) {
        bx.push_back(std::log(static_cast<double>(n)));
        by.push_back(logs[pick(rng)]);
      }
    }
    slopes.push_back(ols(bx, by).first);
  }
  std::sort(slopes.begin(), slopes.end());
  if (!slopes.empty()) {
    const double tail = 0.5 * (1 - level);
    auto at = [&](double q) {
      const auto i = static_cast<std::size_t>(std::clamp(q * (slopes.size() - 1), 0.0, slopes.size() - 1.0));
      return slopes[i];
    };
    fit.ci_low = at(tail);
    fit.ci_high = at(1 - tail);
  } else {
    fit.ci_low = fit.ci_high = fit.slope;
  }
  return fit;
}

std::vector<TrendRow> trend_summary(const ResultTable& table) {
  std::map<int, std::vector<const ResultRow*>> groups;
  for (const auto& r : table) groups[r.n].push_back(&r);
  std::vector<TrendRow> out;
  for (const auto& [n, rows] : groups) {
    std::vector<double> pt, fp, fn, l2;
    for (const auto* r : rows) {
      pt.push_back(r->prob_true_model);
      fp.push_back(r->fp_mass);
      fn.push_back(r->fn_mass);
      l2.push_back(r->l2_error);
    }
    out.push_back({n, median(pt), median(fp), median(fn), median(l2), static_cast<int>(rows.size())});
  }
  return out;
}

}  // namespace sesgp
