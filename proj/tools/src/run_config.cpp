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

#include "twostage_cli/run_config.hpp"

#include <initializer_list>
#include <string>

#include "twostage/binary_io.hpp"
#include "twostage/error.hpp"
#include "twostage/json_io.hpp"

namespace twostage::cli {
namespace {

constexpr std::initializer_list<const char*> kRunKeys = {"seed",   "manifest", "out",
                                                         "format", "cohort",   "train"};

bool is_run_config(const nlohmann::json& j) {
  for (const char* key : {"manifest", "out", "format", "cohort", "train"}) {
    if (j.contains(key)) return true;
  }
  return false;
}

std::filesystem::path get_path(const nlohmann::json& j, const char* key) {
  if (!j[key].is_string() || j[key].get<std::string>().empty()) {
    throw ConfigError(std::string(key) + ": expected a non-empty path string");
  }
  return j[key].get<std::string>();
}

}  // namespace

std::optional<ReportFormat> parse_report_format(std::string_view s) {
  if (s == "text") return ReportFormat::kText;
  if (s == "json") return ReportFormat::kJson;
  return std::nullopt;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : kRunKeys) known = known || key == k;
    if (!known) throw ConfigError("run config: unknown key '" + key + "'");
  }

  RunConfig config;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) {
      throw ConfigError("seed: expected a non-negative integer");
    }
    config.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("manifest")) config.manifest = get_path(j, "manifest");
  if (j.contains("out")) config.out = get_path(j, "out");
  if (j.contains("format")) {
    const auto format =
        j["format"].is_string() ? parse_report_format(j["format"].get<std::string>()) : std::nullopt;
    if (!format) throw ConfigError("format: expected \"text\" or \"json\"");
    config.format = format;
  }
  if (j.contains("cohort")) {
    config.cohort = cohort_spec_from_json(j["cohort"]);
    config.cohort_has_seed = j["cohort"].contains("seed");
  }
  if (j.contains("train")) {
    config.train = train_config_from_json(j["train"]);
    config.train_has_seed = j["train"].contains("seed");
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const auto j = parse_json(binary::read_file(path), path.string());
  if (j.is_object() && !is_run_config(j)) {
    RunConfig config;
    config.cohort = cohort_spec_from_json(j);
    config.cohort_has_seed = j.contains("seed");
    if (config.cohort_has_seed) config.seed = config.cohort->seed;
    return config;
  }
  return run_config_from_json(j);
}

std::uint64_t resolve_cohort_seed(const RunConfig& config, std::optional<std::uint64_t> flag) {
  if (flag) return *flag;
  if (config.cohort && config.cohort_has_seed) return config.cohort->seed;
  if (config.seed) return *config.seed;
  throw ConfigError("a seed is required: pass --seed or set \"seed\" in the config");
}

std::uint64_t resolve_train_seed(const RunConfig& config, std::optional<std::uint64_t> flag) {
  if (flag) return *flag;
  if (config.train_has_seed) return config.train.seed;
  if (config.seed) return *config.seed;
  throw ConfigError("a seed is required: pass --seed or set \"seed\" in the config");
}

}  // namespace twostage::cli
