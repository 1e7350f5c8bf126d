/*
 * Copyright 2026 The twostage Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// JSON encodings of configuration documents and metric reports.
//
// Readers reject unknown keys and out-of-range values with ConfigError and
// fall back to defaults for absent keys.

#ifndef TWOSTAGE_JSON_IO_HPP_
#define TWOSTAGE_JSON_IO_HPP_

#include <span>
#include <string>

#include <json.hpp>

#include "twostage/data.hpp"
#include "twostage/metrics.hpp"
#include "twostage/pipeline.hpp"
#include "twostage/preprocess.hpp"

namespace twostage {

using Json = nlohmann::ordered_json;

Json to_json(const VolumeDims& dims);
Json to_json(const PreprocessConfig& config);
Json to_json(const CohortSpec& spec);
Json to_json(const ScheduleConfig& schedule);
Json to_json(const TrainConfig& config);
Json to_json(const EpochRecord& record);

PreprocessConfig preprocess_config_from_json(const nlohmann::json& j);
CohortSpec cohort_spec_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Parses text and throws ConfigError with `what` on syntax errors.
nlohmann::json parse_json(std::string_view text, const std::string& what);

// Class names index the per-class entries; pass disease names for disease
// reports.
Json report_to_json(const MetricsReport& report, std::span<const std::string> class_names);

std::vector<std::string> disease_class_names();

}  // namespace twostage

#endif  // TWOSTAGE_JSON_IO_HPP_
