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

#include "sesgp/config.hpp"

#include <fstream>

namespace sesgp {
namespace {

using nlohmann::json;

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void require_object(const json& j, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
}

}  // namespace

PriorConfig prior_from_json(const json& j) {
  require_object(j, "prior");
  PriorConfig p;
  try {
    if (j.contains("size_prior")) {
      const auto& s = j.at("size_prior");
      require_object(s, "size_prior");
      const std::string kind = s.value("kind", "cap");
      if (kind == "cap") {
        p.size.kind = SparsityPriorConfig::Kind::cap;
      } else if (kind == "penalized") {
        p.size.kind = SparsityPriorConfig::Kind::penalized;
      } else {
        throw ConfigError("size_prior.kind must be \"cap\" or \"penalized\", got \"" + kind + "\"");
      }
      read(s, "k", p.size.k);
    }
    if (j.contains("rescaling")) {
      require_object(j.at("rescaling"), "rescaling");
      read(j.at("rescaling"), "rate", p.rescaling.rate);
    }
    read(j, "xi", p.rescaling.xi);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("prior: ") + e.what());
  }
  if (!(p.rescaling.rate > 0)) throw ConfigError("rescaling.rate must be positive");
  if (!(p.rescaling.xi > 0)) throw ConfigError("xi must be positive");
  if (!(p.size.k > 0)) throw ConfigError("size_prior.k must be positive");
  return p;
}

json prior_to_json(const PriorConfig& p) {
  return {{"size_prior",
           {{"kind", p.size.kind == SparsityPriorConfig::Kind::cap ? "cap" : "penalized"}, {"k", p.size.k}}},
          {"rescaling", {{"rate", p.rescaling.rate}}},
          {"xi", p.rescaling.xi}};
}

ExperimentPlan plan_from_json(const json& j) {
  require_object(j, "plan");
  ExperimentPlan plan;
  try {
    read(j, "n_grid", plan.n_grid);
    read(j, "replications", plan.replications);
    read(j, "chains", plan.chains);
    read(j, "iters", plan.iters);
    read(j, "burn_in", plan.burn_in);
    read(j, "seed", plan.seed);
    read(j, "sigma", plan.sigma);
    read(j, "xi", plan.xi);
    read(j, "eval_points", plan.eval_points);
    read(j, "max_states", plan.max_states);
    if (j.contains("d_rule")) {
      const auto& d = j.at("d_rule");
      require_object(d, "d_rule");
      const std::string kind = d.value("kind", "fixed");
      if (kind == "fixed") {
        plan.d_rule.kind = DimensionRule::Kind::fixed;
      } else if (kind == "growth") {
        plan.d_rule.kind = DimensionRule::Kind::growth;
      } else {
        throw ConfigError("d_rule.kind must be \"fixed\" or \"growth\"");
      }
      read(d, "d", plan.d_rule.fixed);
      read(d, "c", plan.d_rule.c);
      read(d, "cap", plan.d_rule.cap);
    }
    json prior = j.value("prior", json::object());
    if (!prior.contains("xi")) prior["xi"] = plan.xi;
    plan.prior = prior_from_json(prior);
    plan.truth.xi = plan.xi;
    if (j.contains("truth")) {
      const auto& t = j.at("truth");
      require_object(t, "truth");
      double beta = plan.truth.smoothness.beta;
      double alpha = plan.truth.smoothness.alpha;
      read(t, "d0", plan.truth.d0);
      read(t, "beta", beta);
      read(t, "alpha", alpha);
      plan.truth.smoothness = SmoothnessSpec::make(beta, alpha, plan.truth.d0, SmoothnessSpec::Bound::closed);
      const std::string construction = t.value("construction", "cosine_series");
      if (construction == "cosine_series") {
        plan.truth.construction = TruthSpec::Construction::cosine_series;
      } else if (construction == "fourier_decay") {
        plan.truth.construction = TruthSpec::Construction::fourier_decay;
      } else {
        throw ConfigError("truth.construction must be \"cosine_series\" or \"fourier_decay\"");
      }
      read(t, "seed", plan.truth.seed);
      read(t, "delta_floor", plan.truth.delta_floor);
      read(t, "shells", plan.truth.shells);
      read(t, "directions", plan.truth.directions);
      read(t, "shell_spacing", plan.truth.shell_spacing);
      read(t, "amplitude", plan.truth.amplitude);
      read(t, "delta_mc", plan.truth.delta_mc);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  }
  if (plan.n_grid.empty()) throw ConfigError("n_grid must not be empty");
  for (int n : plan.n_grid)
    if (n < 3) throw ConfigError("n_grid entries must be >= 3");
  if (plan.replications < 1 || plan.chains < 1) throw ConfigError("replications and chains must be >= 1");
  if (plan.iters < 1 || plan.burn_in < 0 || plan.burn_in >= plan.iters)
    throw ConfigError("need 0 <= burn_in < iters");
  if (!(plan.sigma > 0)) throw ConfigError("sigma must be positive");
  if (!(plan.xi > 0)) throw ConfigError("xi must be positive");
  if (plan.d_rule.kind == DimensionRule::Kind::fixed && plan.d_rule.fixed < plan.truth.d0)
    throw ConfigError("d_rule.d must be at least d0");
  return plan;
}

json plan_to_json(const ExperimentPlan& p) {
  const auto& t = p.truth;
  return {{"n_grid", p.n_grid},
          {"d_rule",
           {{"kind", p.d_rule.kind == DimensionRule::Kind::fixed ? "fixed" : "growth"},
            {"d", p.d_rule.fixed},
            {"c", p.d_rule.c},
            {"cap", p.d_rule.cap}}},
          {"replications", p.replications},
          {"chains", p.chains},
          {"iters", p.iters},
          {"burn_in", p.burn_in},
          {"seed", p.seed},
          {"sigma", p.sigma},
          {"xi", p.xi},
          {"eval_points", p.eval_points},
          {"max_states", p.max_states},
          {"prior", prior_to_json(p.prior)},
          {"truth",
           {{"d0", t.d0},
            {"beta", t.smoothness.beta},
            {"alpha", t.smoothness.alpha},
            {"construction", t.construction == TruthSpec::Construction::cosine_series ? "cosine_series"
                                                                                       : "fourier_decay"},
            {"seed", t.seed},
            {"delta_floor", t.delta_floor},
            {"shells", t.shells},
            {"directions", t.directions},
            {"shell_spacing", t.shell_spacing},
            {"amplitude", t.amplitude},
            {"delta_mc", t.delta_mc}}}};
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace sesgp
