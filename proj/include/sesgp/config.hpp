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

#include <filesystem>

#include <json.hpp>

#include "sesgp/harness.hpp"

namespace sesgp {

/// {"size_prior": {"kind": "cap"|"penalized", "k": 1}, "rescaling": {"rate": 1}, "xi": 1}
PriorConfig prior_from_json(const nlohmann::json& j);
nlohmann::json prior_to_json(const PriorConfig& prior);

/// Plan files accept any subset of the ExperimentPlan fields; missing keys keep their defaults.
ExperimentPlan plan_from_json(const nlohmann::json& j);
nlohmann::json plan_to_json(const ExperimentPlan& plan);

nlohmann::json load_json(const std::filesystem::path& path);

}  // namespace sesgp
