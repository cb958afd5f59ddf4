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

#include <CLI11.hpp>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "sesgp/config.hpp"
#include "sesgp/eigenexpansion.hpp"
#include "sesgp/harness.hpp"
#include "sesgp/inference.hpp"
#include "sesgp/prior.hpp"
#include "sesgp/rkhs.hpp"
#include "sesgp/smallball.hpp"

using json = nlohmann::ordered_json;
using namespace sesgp;

namespace {

enum class Emit { json, csv };

const std::map<std::string, Emit> kEmitNames{{"json", Emit::json}, {"csv", Emit::csv}};

void add_emit(CLI::App* app, Emit& emit) {
  app->add_option("--emit", emit, "Output format")->transform(CLI::CheckedTransformer(kEmitNames, CLI::ignore_case));
}

/// Writes rows of a flat JSON array as CSV using the keys of the first row.
void print_csv(const json& rows, std::ostream& out = std::cout) {
  if (rows.empty()) return;
  std::vector<std::string> keys;
  for (const auto& [k, _] : rows.front().items()) keys.push_back(k);
  for (std::size_t i = 0; i < keys.size(); ++i) out << (i ? "," : "") << keys[i];
  out << '\n';
  out << std::setprecision(12);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (i) out << ',';
      const auto& v = row.contains(keys[i]) ? row.at(keys[i]) : json();
      if (v.is_string()) out << v.get<std::string>();
      else if (v.is_null()) out << "";
      else out << v.dump();
    }
    out << '\n';
  }
}

std::string join(const std::vector<int>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
  return s;
}

json constants_json(const Constants& c) {
  return {{"xi", c.xi}, {"a", c.a}, {"v1", c.v1}, {"v2", c.v2}, {"v3", c.v3}, {"V", c.V}, {"B", c.B}};
}

Dataset read_dataset_csv(const std::string& path, double sigma) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header.back() != "y") throw ConfigError(path + ": header must be x1,...,xd,y");
  const int d = static_cast<int>(header.size()) - 1;
  std::vector<double> values;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int cols = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++cols;
    }
    if (cols != d + 1) throw ConfigError(path + ": row " + std::to_string(rows + 1) + " has wrong width");
    ++rows;
  }
  Dataset data;
  data.X.resize(rows, d);
  data.y.resize(rows);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < d; ++j) data.X(i, j) = values[static_cast<std::size_t>(i * (d + 1) + j)];
    data.y[i] = values[static_cast<std::size_t>(i * (d + 1) + d)];
  }
  data.sigma = sigma;
  return data;
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  for (int j = 0; j < data.dim(); ++j) out << 'x' << j + 1 << ',';
  out << "y\n" << std::setprecision(17);
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.dim(); ++j) out << data.X(i, j) << ',';
    out << data.y[i] << '\n';
  }
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  if (out.empty()) throw ConfigError("empty grid");
  return out;
}

json trace_summary_json(const PosteriorSummary& s) {
  json top = json::array();
  for (const auto& [g, freq] : s.top_models) top.push_back({{"gamma", g.to_hex()}, {"bits", g.to_bits()}, {"frequency", freq}});
  json out = {{"n_states", s.n_states},
              {"inclusion_probs", std::vector<double>(s.inclusion_probs.data(),
                                                      s.inclusion_probs.data() + s.inclusion_probs.size())},
              {"top_models", top}};
  if (s.prob_true_model) {
    out["prob_true_model"] = *s.prob_true_model;
    out["fp_mass"] = *s.fp_mass;
    out["fn_mass"] = *s.fn_mass;
    out["other_mass"] = *s.other_mass;
  }
  return out;
}

json row_json(const ResultRow& r) {
  return {{"n", r.n},           {"d_n", r.d_n},       {"replication", r.replication},
          {"prob_true_model", r.prob_true_model},    {"fp_mass", r.fp_mass},
          {"fn_mass", r.fn_mass}, {"l2_error", r.l2_error}, {"eps_n", r.eps_n},
          {"minimax_rate", r.minimax}, {"q_d0", r.q_d0}};
}

json report_json(const ResultTable& table, const SmoothnessSpec& s, int bootstrap, std::uint64_t seed) {
  json trends = json::array();
  for (const auto& t : trend_summary(table))
    trends.push_back({{"n", t.n},
                      {"rows", t.rows},
                      {"median_prob_true_model", t.median_prob_true},
                      {"median_fp_mass", t.median_fp_mass},
                      {"median_fn_mass", t.median_fn_mass},
                      {"median_l2_error", t.median_l2_error},
                      {"minimax_rate", minimax_rate(t.n, s)},
                      {"eps_n", contraction_radius(t.n, s)}});
  json out = {{"trend", trends}, {"target_slope", -s.beta / (2 * s.beta + s.d0)}};
  try {
    const SlopeFit fit = contraction_slope(table, bootstrap, seed);
    out["slope"] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"ci_low", fit.ci_low},
                    {"ci_high", fit.ci_high}, {"grid_points", fit.grid_points}};
  } catch (const DomainError& e) {
    out["slope"] = {{"error", e.what()}};
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse rescaled squared-exponential GP regression: theory lab and experiments"};
  app.require_subcommand(1);
  Emit emit = Emit::json;

  // eigen
  double xi = 1.0, a = 1.0;
  int gamma_size = 1, budget = 10;
  bool unsafe = false;
  auto* eigen = app.add_subcommand("eigen", "Ordered spectrum and constants of the rescaled SE kernel");
  eigen->add_option("--xi", xi, "Design standard deviation")->check(CLI::PositiveNumber);
  eigen->add_option("--a", a, "Rescaling level")->check(CLI::PositiveNumber);
  eigen->add_option("--gamma-size", gamma_size, "Number of selected coordinates")->check(CLI::PositiveNumber);
  eigen->add_option("--budget", budget, "Number of eigenvalues")->check(CLI::PositiveNumber);
  eigen->add_flag("--unsafe", unsafe, "Allow xi^2 <= 2/e");
  add_emit(eigen, emit);

  // rkhs
  std::string eps_grid = "0.2,0.1,0.05,0.025";
  auto* rkhs = app.add_subcommand("rkhs", "Entropy bounds and decentering of the RKHS unit ball");
  rkhs->add_option("--xi", xi)->check(CLI::PositiveNumber);
  rkhs->add_option("--a", a)->check(CLI::PositiveNumber);
  rkhs->add_option("--gamma-size", gamma_size)->check(CLI::PositiveNumber);
  rkhs->add_option("--epsilon-grid", eps_grid, "Comma-separated epsilons");
  add_emit(rkhs, emit);

  // smallball
  double epsilon = 0.1;
  std::int64_t samples = 1'000'000;
  std::uint64_t seed = 1;
  auto* smallball = app.add_subcommand("smallball", "Monte Carlo centered small-ball probability");
  smallball->add_option("--xi", xi)->check(CLI::PositiveNumber);
  smallball->add_option("--a", a)->check(CLI::PositiveNumber);
  smallball->add_option("--gamma-size", gamma_size)->check(CLI::PositiveNumber);
  smallball->add_option("--epsilon", epsilon)->check(CLI::PositiveNumber);
  smallball->add_option("--samples", samples)->check(CLI::PositiveNumber);
  smallball->add_option("--seed", seed);
  add_emit(smallball, emit);

  // prior-sample
  int d_n = 8, n = 100, count = 10;
  std::string config_path;
  auto* prior_sample = app.add_subcommand("prior-sample", "Draws (gamma, a) from the hierarchical prior");
  prior_sample->add_option("--config", config_path, "JSON prior block");
  prior_sample->add_option("--d-n", d_n, "Design dimension")->check(CLI::PositiveNumber);
  prior_sample->add_option("--n", n, "Sample size entering q_n")->check(CLI::Range(3, 1 << 30));
  prior_sample->add_option("--count", count)->check(CLI::PositiveNumber);
  prior_sample->add_option("--seed", seed);
  add_emit(prior_sample, emit);

  // fit
  std::string data_path, trace_path;
  int iters = 10000, burn_in = 2000, chains = 4;
  double sigma = 0.5;
  bool estimate_sigma = false;
  auto* fit = app.add_subcommand("fit", "Metropolis-Hastings posterior over (gamma, a)");
  fit->add_option("--data", data_path, "CSV with columns x1..xd,y")->required()->check(CLI::ExistingFile);
  fit->add_option("--config", config_path, "JSON prior block");
  fit->add_option("--iters", iters)->check(CLI::PositiveNumber);
  fit->add_option("--burn-in", burn_in)->check(CLI::NonNegativeNumber);
  fit->add_option("--chains", chains)->check(CLI::PositiveNumber);
  fit->add_option("--seed", seed);
  fit->add_option("--sigma", sigma, "Known noise standard deviation")->check(CLI::PositiveNumber);
  fit->add_flag("--estimate-sigma", estimate_sigma, "Plug-in sigma from a pilot GP fit (off-model)");
  fit->add_option("--trace", trace_path, "Write the chain trace CSV here");
  add_emit(fit, emit);

  // simulate
  std::string plan_path;
  auto* simulate = app.add_subcommand("simulate", "Emit a synthetic dataset as CSV");
  simulate->add_option("--plan", plan_path, "JSON plan supplying the truth and design");
  simulate->add_option("--n", n)->check(CLI::PositiveNumber);
  simulate->add_option("--d-n", d_n)->check(CLI::PositiveNumber);
  simulate->add_option("--sigma", sigma)->check(CLI::NonNegativeNumber);
  simulate->add_option("--seed", seed);

  // consistency
  std::string out_path = "results.csv";
  auto* consistency = app.add_subcommand("consistency", "Run the selection/contraction sweep");
  consistency->add_option("--plan", plan_path, "JSON plan file");
  consistency->add_option("--out", out_path, "Result CSV (appended)");
  consistency->add_option("--seed", seed, "Overrides the plan seed");
  add_emit(consistency, emit);

  // report
  std::string results_path;
  int bootstrap = 2000;
  auto* report = app.add_subcommand("report", "Trend table and contraction slope from a result CSV");
  report->add_option("--results", results_path)->required()->check(CLI::ExistingFile);
  report->add_option("--plan", plan_path, "Plan used for the smoothness target");
  report->add_option("--bootstrap", bootstrap)->check(CLI::NonNegativeNumber);
  report->add_option("--seed", seed);
  add_emit(report, emit);

  CLI11_PARSE(app, argc, argv);

  try {
    std::cout << std::setprecision(12);
    if (*eigen) {
      DesignSpec::make(gamma_size, xi, unsafe);
      const auto c = compute_constants(xi, a);
      const auto spec = enumerate_spectrum(SparsityPattern::full(gamma_size), c, budget);
      json rows = json::array();
      for (int k = 0; k < spec.size(); ++k) {
        const auto& e = spec.entries()[static_cast<std::size_t>(k)];
        rows.push_back({{"index", k}, {"degree", e.degree}, {"multi_index", join(e.multi_index, ' ')},
                        {"eigenvalue", e.eigenvalue}});
      }
      if (emit == Emit::csv) {
        print_csv(rows);
      } else {
        std::cout << json{{"constants", constants_json(c)}, {"tail", spec.tail()}, {"spectrum", rows}}.dump(2)
                  << '\n';
      }
    } else if (*rkhs) {
      const auto c = compute_constants(xi, a);
      const SparsityPattern g = SparsityPattern::full(gamma_size);
      json rows = json::array();
      for (double eps : parse_grid(eps_grid)) {
        const int J = small_ball_truncation(gamma_size, c, eps);
        auto spec = std::make_shared<const Spectrum>(enumerate_spectrum(g, c, J));
        const Ellipsoid ell(spec);
        json row = {{"epsilon", eps}, {"truncation", J}};
        const auto ent = entropy_bounds(ell, eps);
        if (const auto* e = std::get_if<EntropyEstimate>(&ent)) {
          row["m_star"] = e->m_star;
          row["tau"] = e->tau;
          row["log_upper"] = e->log_upper;
          row["log_lower"] = e->log_lower;
          row["hypothesis"] = "ok";
        } else {
          for (const char* k : {"m_star", "tau", "log_upper", "log_lower"}) row[k] = nullptr;
          row["hypothesis"] = std::get<HypothesisReport>(ent).reason;
        }
        // Target: unit coefficient on the leading basis function.
        Eigen::VectorXd target = Eigen::VectorXd::Zero(spec->size());
        target[0] = 1.0;
        const auto dec = decentering(ell.axes(), target, eps);
        row["decentering"] = dec.inf_sq_norm;
        row["multiplier"] = dec.multiplier;
        rows.push_back(row);
      }
      if (emit == Emit::csv) print_csv(rows);
      else std::cout << json{{"constants", constants_json(c)}, {"rows", rows}}.dump(2) << '\n';
    } else if (*smallball) {
      const auto c = compute_constants(xi, a);
      const int J = small_ball_truncation(gamma_size, c, epsilon);
      auto spec = std::make_shared<const Spectrum>(enumerate_spectrum(SparsityPattern::full(gamma_size), c, J));
      const auto est = centered_small_ball(*spec, epsilon, samples, seed);
      json row = {{"epsilon", est.epsilon},       {"probability", est.probability},
                  {"prob_std_err", est.prob_std_err}, {"neg_log_prob", est.neg_log_prob},
                  {"mc_std_err", est.mc_std_err}, {"n_samples", est.n_samples},
                  {"truncation", est.truncation}, {"tail_bound", est.tail_bound},
                  {"tilt", est.tilt},             {"censored", est.censored}};
      const auto bounds = centered_exponent_bounds(Ellipsoid(spec), epsilon);
      if (const auto* b = std::get_if<ExponentBounds>(&bounds)) {
        row["bound_lower"] = b->lower;
        row["bound_upper"] = b->upper;
      } else {
        row["bound_lower"] = nullptr;
        row["bound_upper"] = nullptr;
      }
      if (emit == Emit::csv) print_csv(json::array({row}));
      else std::cout << row.dump(2) << '\n';
    } else if (*prior_sample) {
      PriorConfig prior = config_path.empty() ? PriorConfig{} : prior_from_json(load_json(config_path));
      prior.size.d_n = d_n;
      prior.size.n = n;
      const auto pmf = size_prior_pmf(prior.size);
      Rng rng = make_rng(seed, 0);
      json rows = json::array();
      for (int i = 0; i < count; ++i) {
        const SparsityPattern g = sample_gamma(pmf, d_n, rng);
        json row = {{"draw", i}, {"gamma", g.to_hex()}, {"bits", g.to_bits()}, {"size", g.cardinality()}};
        if (g.empty()) row["a"] = nullptr;
        else row["a"] = sample_rescaling(prior.rescaling, g.cardinality(), rng);
        rows.push_back(row);
      }
      if (emit == Emit::csv) print_csv(rows);
      else std::cout << json{{"size_pmf", std::vector<double>(pmf.data(), pmf.data() + pmf.size())}, {"draws", rows}}.dump(2) << '\n';
    } else if (*fit) {
      Dataset data = read_dataset_csv(data_path, sigma);
      PriorConfig prior = config_path.empty() ? PriorConfig{} : prior_from_json(load_json(config_path));
      if (estimate_sigma) data.sigma = estimate_sigma_pilot(data.X, data.y, prior.rescaling.xi);
      data.validate();
      if (burn_in >= iters) throw ConfigError("--burn-in must be below --iters");
      McmcOptions opt;
      opt.iters = iters;
      opt.seed = seed;
      const auto traces = run_chains(data, prior, opt, chains);
      if (!trace_path.empty()) {
        std::ofstream tout(trace_path);
        if (!tout) throw ConfigError("cannot open " + trace_path);
        tout << "chain,iter,gamma,log_a,log_marginal\n" << std::setprecision(12);
        for (std::size_t c = 0; c < traces.size(); ++c)
          for (const auto& r : traces[c])
            tout << c << ',' << r.iter << ',' << r.state.gamma.to_hex() << ',' << r.state.log_a << ','
                 << r.state.log_marginal << '\n';
      }
      const auto summary = summarize(traces, static_cast<std::size_t>(burn_in));
      json out = trace_summary_json(summary);
      out["sigma"] = data.sigma;
      if (emit == Emit::csv) {
        json rows = json::array();
        for (int j = 0; j < data.dim(); ++j) rows.push_back({{"coordinate", j + 1}, {"inclusion_prob", summary.inclusion_probs[j]}});
        print_csv(rows);
      } else {
        std::cout << out.dump(2) << '\n';
      }
    } else if (*simulate) {
      ExperimentPlan plan = plan_path.empty() ? ExperimentPlan{} : plan_from_json(load_json(plan_path));
      if (simulate->count("--sigma") == 0) sigma = plan.sigma;
      if (simulate->count("--d-n") == 0) d_n = plan.d_rule(n, plan.truth.smoothness);
      const Truth truth = make_truth(plan.truth);
      write_dataset_csv(generate_dataset(truth, DesignSpec::make(d_n, plan.xi), n, sigma, seed), std::cout);
    } else if (*consistency) {
      ExperimentPlan plan = plan_path.empty() ? ExperimentPlan{} : plan_from_json(load_json(plan_path));
      if (consistency->count("--seed")) plan.seed = seed;
      const Truth truth = make_truth(plan.truth);
      std::cerr << "truth: delta_hat=" << truth.delta_hat << " (se " << truth.delta_std_err << ", "
                << truth.redraws << " redraws), config " << config_hash(plan) << '\n';
      const auto table =
          run_consistency(plan, truth, out_path, [](const std::string& msg) { std::cerr << msg << '\n'; });
      const json rep = report_json(table, plan.truth.smoothness, 2000, plan.seed);
      if (emit == Emit::csv) print_csv(rep.at("trend"));
      else std::cout << rep.dump(2) << '\n';
    } else if (*report) {
      ExperimentPlan plan = plan_path.empty() ? ExperimentPlan{} : plan_from_json(load_json(plan_path));
      const auto table = read_result_csv(results_path);
      const json rep = report_json(table, plan.truth.smoothness, bootstrap, seed);
      if (emit == Emit::csv) print_csv(rep.at("trend"));
      else std::cout << rep.dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
