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

// Run configuration documents accepted by --config.
//
// A run config is a JSON object with any of these keys:
//
//   seed      fallback seed for the cohort and the training run
//   manifest  dataset manifest used by train, train-baseline, eval, compare
//   out       output directory
//   format    "text" or "json"
//   cohort    cohort spec (see the synth command)
//   train     training config, including its preprocess block
//
// Command-line flags override the document. Relative paths are taken
// relative to the working directory.

#ifndef TWOSTAGE_CLI_RUN_CONFIG_HPP_
#define TWOSTAGE_CLI_RUN_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include <json.hpp>

#include "twostage/data.hpp"
#include "twostage/pipeline.hpp"

namespace twostage::cli {

enum class ReportFormat { kText, kJson };

std::optional<ReportFormat> parse_report_format(std::string_view s);

struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> out;
  std::optional<ReportFormat> format;

  std::optional<CohortSpec> cohort;
  bool cohort_has_seed = false;

  TrainConfig train = TrainConfig::paper_profile();
  bool train_has_seed = false;
};

// Throws ConfigError on unknown keys or invalid values.
RunConfig run_config_from_json(const nlohmann::json& j);

// Reads a run config. A document without any run-config section is taken to
// be a bare cohort spec and lands in `cohort`.
RunConfig load_run_config(const std::filesystem::path& path);

// Seed precedence: flag, then the section's own seed, then the top-level
// seed. Throws ConfigError when none is set.
std::uint64_t resolve_cohort_seed(const RunConfig& config, std::optional<std::uint64_t> flag);
std::uint64_t resolve_train_seed(const RunConfig& config, std::optional<std::uint64_t> flag);

}  // namespace twostage::cli

#endif  // TWOSTAGE_CLI_RUN_CONFIG_HPP_
