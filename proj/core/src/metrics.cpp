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

#include "twostage/metrics.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <string>

#include "twostage/error.hpp"

namespace twostage {

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
  if (truth >= num_classes_ || predicted >= num_classes_) {
    throw InvalidInput("label outside [0, " + std::to_string(num_classes_) + ")");
  }
  ++counts_[truth * num_classes_ + predicted];
}

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t c = 0; c < num_classes_; ++c) t += at(c, c);
  return t;
}

ConfusionMatrix confusion(std::span<const std::size_t> true_labels,
                          std::span<const std::size_t> predicted_labels,
                          std::size_t num_classes) {
  if (true_labels.size() != predicted_labels.size()) {
    throw InvalidInput("label and prediction counts differ");
  }
  ConfusionMatrix m(num_classes);
  for (std::size_t i = 0; i < true_labels.size(); ++i) m.add(true_labels[i], predicted_labels[i]);
  return m;
}

ClassPrf class_prf(const ConfusionMatrix& matrix, std::size_t cls) {
  std::size_t tp = matrix.at(cls, cls);
  std::size_t predicted = 0;
  std::size_t actual = 0;
  for (std::size_t k = 0; k < matrix.num_classes(); ++k) {
    predicted += matrix.at(k, cls);
    actual += matrix.at(cls, k);
  }
  ClassPrf out;
  if (predicted > 0) {
    out.precision = static_cast<double>(tp) / static_cast<double>(predicted);
  } else {
    out.degenerate = true;
  }
  if (actual > 0) {
    out.recall = static_cast<double>(tp) / static_cast<double>(actual);
  } else {
    out.degenerate = true;
  }
  if (out.precision + out.recall > 0.0) {
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  } else {
    out.degenerate = true;
  }
  return out;
}

MacroSummary macro(const ConfusionMatrix& matrix) {
  if (matrix.num_classes() == 0) throw InvalidInput("macro averages need at least one class");
  const std::size_t total = matrix.total();
  if (total == 0) throw InvalidInput("no evaluated samples");
  MacroSummary out;
  out.accuracy = static_cast<double>(matrix.trace()) / static_cast<double>(total);
  for (std::size_t c = 0; c < matrix.num_classes(); ++c) {
    out.per_class.push_back(class_prf(matrix, c));
    out.macro_precision += out.per_class.back().precision;
    out.macro_recall += out.per_class.back().recall;
    out.macro_f1 += out.per_class.back().f1;
  }
  const auto n = static_cast<double>(matrix.num_classes());
  out.macro_precision /= n;
  out.macro_recall /= n;
  out.macro_f1 /= n;
  return out;
}

std::optional<double> auc_binary(std::span<const double> scores, std::span<const bool> positives) {
  if (scores.size() != positives.size()) throw InvalidInput("score and label counts differ");
  // Sort once, then credit each positive with the negatives strictly below it
  // plus half of the negatives tied with it.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double wins = 0.0;
  std::size_t negatives_below = 0;
  std::size_t num_pos = 0;
  std::size_t num_neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t tied_pos = 0;
    std::size_t tied_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (positives[order[j]] ? tied_pos : tied_neg) += 1;
      ++j;
    }
    wins += static_cast<double>(tied_pos) *
            (static_cast<double>(negatives_below) + 0.5 * static_cast<double>(tied_neg));
    negatives_below += tied_neg;
    num_pos += tied_pos;
    num_neg += tied_neg;
    i = j;
  }
  if (num_pos == 0 || num_neg == 0) return std::nullopt;
  return wins / (static_cast<double>(num_pos) * static_cast<double>(num_neg));
}

MacroAuc macro_auc_ovr(const Eigen::MatrixXd& probs, std::span<const std::size_t> true_labels) {
  if (static_cast<std::size_t>(probs.cols()) != true_labels.size()) {
    throw InvalidInput("probability columns and label count differ");
  }
  const auto num_classes = static_cast<std::size_t>(probs.rows());
  std::vector<bool> present(num_classes, false);
  for (std::size_t y : true_labels) {
    if (y >= num_classes) throw InvalidInput("label out of range");
    present[y] = true;
  }
  if (std::count(present.begin(), present.end(), true) < 2) {
    throw InvalidInput("macro AUC needs at least two classes present");
  }

  MacroAuc out;
  double sum = 0.0;
  std::size_t defined = 0;
  std::vector<double> scores(true_labels.size());
  // std::vector<bool> has no contiguous storage, hence the byte buffer.
  auto positives = std::make_unique<bool[]>(true_labels.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
      scores[i] = probs(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i));
      positives[i] = true_labels[i] == c;
    }
    const auto auc = auc_binary(scores, std::span<const bool>(positives.get(), true_labels.size()));
    out.per_class.push_back(auc);
    if (auc) {
      sum += *auc;
      ++defined;
    } else {
      ++out.undefined_classes;
    }
  }
  out.value = sum / static_cast<double>(defined);
  return out;
}

MetricsReport build_report(std::span<const std::size_t> true_labels,
                           std::span<const std::size_t> predicted_labels,
                           const Eigen::MatrixXd& probs) {
  const auto num_classes = static_cast<std::size_t>(probs.rows());
  MetricsReport report;
  report.confusion = confusion(true_labels, predicted_labels, num_classes);
  const MacroSummary summary = macro(report.confusion);
  report.accuracy = summary.accuracy;
  report.macro_precision = summary.macro_precision;
  report.macro_recall = summary.macro_recall;
  report.macro_f1 = summary.macro_f1;
  report.per_class = summary.per_class;
  report.sample_count = true_labels.size();

  std::vector<bool> present(num_classes, false);
  for (std::size_t y : true_labels) present[y] = true;
  if (std::count(present.begin(), present.end(), true) >= 2) {
    const MacroAuc auc = macro_auc_ovr(probs, true_labels);
    report.macro_auc = auc.value;
    report.per_class_auc = auc.per_class;
    report.auc_undefined_classes = auc.undefined_classes;
  } else {
    report.per_class_auc.assign(num_classes, std::nullopt);
    report.auc_undefined_classes = num_classes;
  }
  return report;
}

}  // namespace twostage
