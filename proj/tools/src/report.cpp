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

#include "twostage_cli/report.hpp"

#include <cstdio>
#include <optional>
#include <sstream>

#include "twostage/hash.hpp"

namespace twostage::cli {
namespace {

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

std::string optional_fixed(const std::optional<double>& value, int decimals) {
  return value ? fixed(*value, decimals) : "n/a";
}

std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string pad_left(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace

std::string dataset_sha256(const Dataset& dataset) {
  std::string stream;
  for (const auto& s : dataset.samples()) {
    for (std::string_view field : {std::string_view(s.id), to_string(s.gender),
                                   to_string(s.disease), to_string(s.split)}) {
      stream.append(field);
      stream.push_back('\0');
    }
    stream += encode_volume(s.volume);
  }
  return sha256_hex(stream);
}

CohortCounts tally_counts(const Dataset& dataset) {
  CohortCounts counts{};
  for (const auto& s : dataset.samples()) {
    ++counts[index_of(s.disease)][index_of(s.gender)][static_cast<std::size_t>(s.split)];
  }
  return counts;
}

Json counts_to_json(const CohortCounts& counts) {
  Json j;
  std::size_t totals[2] = {0, 0};
  for (Disease d : kAllDiseases) {
    Json cell;
    for (Split s : {Split::kTrain, Split::kVal}) {
      Json by_gender;
      for (Gender g : {Gender::kFemale, Gender::kMale}) {
        const auto n = counts[index_of(d)][index_of(g)][static_cast<std::size_t>(s)];
        by_gender[std::string(to_string(g))] = n;
        totals[static_cast<std::size_t>(s)] += n;
      }
      cell[std::string(to_string(s))] = by_gender;
    }
    j[std::string(to_string(d))] = cell;
  }
  return {{"cells", j}, {"totals", {{"train", totals[0]}, {"val", totals[1]}}}};
}

std::string counts_table(const CohortCounts& counts) {
  constexpr std::size_t kNameWidth = 24;
  std::ostringstream out;
  out << pad_right("Disease", kNameWidth) << " | Train F | Train M | Val F | Val M\n";
  out << std::string(kNameWidth, '-') << "-+---------+---------+-------+------\n";
  std::size_t column_totals[4] = {0, 0, 0, 0};
  for (Disease d : kAllDiseases) {
    const auto& c = counts[index_of(d)];
    const std::size_t cells[4] = {c[0][0], c[1][0], c[0][1], c[1][1]};
    out << pad_right(std::string(display_name(d)), kNameWidth);
    for (std::size_t i = 0; i < 4; ++i) {
      out << " | " << pad_left(std::to_string(cells[i]), i < 2 ? 7 : 5);
      column_totals[i] += cells[i];
    }
    out << "\n";
  }
  out << pad_right("Total", kNameWidth);
  for (std::size_t i = 0; i < 4; ++i) {
    out << " | " << pad_left(std::to_string(column_totals[i]), i < 2 ? 7 : 5);
  }
  out << "\n\ntrain samples: " << column_totals[0] + column_totals[1]
      << ", val samples: " << column_totals[2] + column_totals[3] << "\n";
  return out.str();
}

Json evaluation_to_json(const Evaluation& evaluation) {
  Json j;
  j["method"] = evaluation.method;
  j["kind"] = evaluation.kind;
  j["routing"] = evaluation.routing;
  j["auc_probabilities"] =
      evaluation.kind == "two_stage" ? "hard_routed_disease_classifier" : "single_classifier";
  j["disease_loss"] = evaluation.checkpoint_config.value("use_class_weights", true)
                          ? "weighted_cross_entropy"
                          : "cross_entropy";
  j["checkpoint_config_hash"] = evaluation.checkpoint_config_hash;
  j["checkpoint_config"] = evaluation.checkpoint_config;
  j["metrics"] = report_to_json(evaluation.metrics, disease_class_names());
  return j;
}

Json eval_report(const Evaluation& evaluation, const EvaluationContext& context) {
  Json j;
  j["report_version"] = kReportVersion;
  j["command"] = "eval";
  j["split"] = context.split;
  j["manifest_sha256"] = context.manifest_sha256;
  j["dataset_sha256"] = context.dataset_sha256;
  j["evaluation"] = evaluation_to_json(evaluation);
  return j;
}

std::string eval_report_text(const Evaluation& evaluation, const EvaluationContext& context) {
  const auto& m = evaluation.metrics;
  std::ostringstream out;
  out << evaluation.method << " on the " << context.split << " split (" << m.sample_count
      << " samples)\n";
  out << "manifest sha256: " << context.manifest_sha256 << "\n";
  out << "dataset sha256:  " << context.dataset_sha256 << "\n";
  out << "config sha256:   " << evaluation.checkpoint_config_hash << "\n\n";
  out << "accuracy        " << fixed(100.0 * m.accuracy, 2) << " %\n";
  out << "macro precision " << fixed(m.macro_precision, 4) << "\n";
  out << "macro recall    " << fixed(m.macro_recall, 4) << "\n";
  out << "macro F1        " << fixed(m.macro_f1, 4) << "\n";
  out << "macro AUC       " << optional_fixed(m.macro_auc, 4) << "  (" << kAucVariant;
  if (m.auc_undefined_classes > 0) out << "; " << m.auc_undefined_classes << " class(es) skipped";
  out << ")\n";
  if (m.gender_accuracy) {
    out << "gender accuracy " << fixed(100.0 * *m.gender_accuracy, 2) << " %  (routing: "
        << evaluation.routing << ")\n";
  }
  out << "\nClass                    | Precision | Recall |     F1 |    AUC\n";
  out << "-------------------------+-----------+--------+--------+-------\n";
  for (Disease d : kAllDiseases) {
    const auto c = index_of(d);
    out << pad_right(std::string(display_name(d)) + (m.per_class[c].degenerate ? " (!)" : ""), 24)
        << " | " << pad_left(fixed(m.per_class[c].precision, 4), 9) << " | "
        << pad_left(fixed(m.per_class[c].recall, 4), 6) << " | "
        << pad_left(fixed(m.per_class[c].f1, 4), 6) << " | "
        << pad_left(optional_fixed(m.per_class_auc[c], 4), 6) << "\n";
  }
  out << "\nConfusion (rows true, columns predicted):\n";
  for (std::size_t t = 0; t < m.confusion.num_classes(); ++t) {
    out << "  " << pad_right(std::string(display_name(kAllDiseases[t])), 24);
    for (std::size_t p = 0; p < m.confusion.num_classes(); ++p) {
      out << pad_left(std::to_string(m.confusion.at(t, p)), 6);
    }
    out << "\n";
  }
  return out.str();
}

Json compare_report(std::span<const Evaluation> rows, const EvaluationContext& context) {
  Json j;
  j["report_version"] = kReportVersion;
  j["command"] = "compare";
  j["split"] = context.split;
  j["manifest_sha256"] = context.manifest_sha256;
  j["dataset_sha256"] = context.dataset_sha256;
  Json list = Json::array();
  for (const auto& row : rows) list.push_back(evaluation_to_json(row));
  j["rows"] = list;
  return j;
}

std::string compare_report_text(std::span<const Evaluation> rows,
                                const EvaluationContext& context) {
  std::ostringstream out;
  const std::size_t n = rows.empty() ? 0 : rows.front().metrics.sample_count;
  out << "Comparison on the " << context.split << " split (" << n << " samples)\n";
  out << "manifest sha256: " << context.manifest_sha256 << "\n";
  out << "dataset sha256:  " << context.dataset_sha256 << "\n\n";
  out << "Method | Accuracy | Macro-F1 | Macro-AUC\n";
  out << "--- | ---: | ---: | ---:\n";
  for (const auto& row : rows) {
    out << row.method << " | " << fixed(100.0 * row.metrics.accuracy, 2) << " | "
        << fixed(row.metrics.macro_f1, 4) << " | " << optional_fixed(row.metrics.macro_auc, 4)
        << "\n";
  }

  out << "\nPer-class F1\n\nClass";
  for (const auto& row : rows) out << " | " << row.method;
  out << "\n---";
  for (std::size_t i = 0; i < rows.size(); ++i) out << " | ---:";
  out << "\n";
  for (Disease d : kAllDiseases) {
    const bool minority = d == Disease::kSquamousCellCarcinoma;
    out << (minority ? "**" : "") << display_name(d) << (minority ? "** (minority)" : "");
    for (const auto& row : rows) out << " | " << fixed(row.metrics.per_class[index_of(d)].f1, 4);
    out << "\n";
  }

  bool any_gender = false;
  for (const auto& row : rows) any_gender = any_gender || row.metrics.gender_accuracy.has_value();
  if (any_gender) {
    out << "\nGender-stage accuracy:";
    for (const auto& row : rows) {
      if (row.metrics.gender_accuracy) {
        out << " " << row.method << " " << fixed(100.0 * *row.metrics.gender_accuracy, 2) << " %";
      }
    }
    out << "\n";
  }
  out << "\nAUC: " << kAucVariant << "; routed models score with the selected classifier only.\n";
  return out.str();
}

}  // namespace twostage::cli
