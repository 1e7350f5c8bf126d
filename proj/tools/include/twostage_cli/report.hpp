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

#ifndef TWOSTAGE_CLI_REPORT_HPP_
#define TWOSTAGE_CLI_REPORT_HPP_

#include <span>
#include <string>

#include "twostage/data.hpp"
#include "twostage/json_io.hpp"
#include "twostage/metrics.hpp"

namespace twostage::cli {

inline constexpr int kReportVersion = 1;

// Per-cell sample counts of a dataset, tallied from its samples.
CohortCounts tally_counts(const Dataset& dataset);
Json counts_to_json(const CohortCounts& counts);
std::string counts_table(const CohortCounts& counts);

// One evaluated checkpoint.
struct Evaluation {
  std::string method;  // display name, e.g. "Gender-aware"
  std::string kind;    // "two_stage" or "baseline"
  std::string routing;  // "predicted_gender", "true_gender" or "none"
  MetricsReport metrics;
  Json checkpoint_config;
  std::string checkpoint_config_hash;
};

// The context shared by every report: which data was scored.
struct EvaluationContext {
  std::string split;
  std::string manifest_sha256;
  std::string dataset_sha256;
};

// SHA-256 over every sample's id, labels and encoded volume, in manifest order.
// Unlike the manifest digest it changes when voxel data changes.
std::string dataset_sha256(const Dataset& dataset);

Json evaluation_to_json(const Evaluation& evaluation);
Json eval_report(const Evaluation& evaluation, const EvaluationContext& context);
std::string eval_report_text(const Evaluation& evaluation, const EvaluationContext& context);

Json compare_report(std::span<const Evaluation> rows, const EvaluationContext& context);
// Markdown table with columns Method | Accuracy | Macro-F1 | Macro-AUC, then a
// per-class breakdown with the minority class marked.
std::string compare_report_text(std::span<const Evaluation> rows,
                                const EvaluationContext& context);

}  // namespace twostage::cli

#endif  // TWOSTAGE_CLI_REPORT_HPP_
