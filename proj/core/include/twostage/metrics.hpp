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

// Classification metrics: confusion matrix, per-class precision / recall / F1,
// macro averages and one-vs-rest ROC AUC (Mann-Whitney form, ties count 1/2).

#ifndef TWOSTAGE_METRICS_HPP_
#define TWOSTAGE_METRICS_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace twostage {

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes = 0)
      : num_classes_(num_classes), counts_(num_classes * num_classes, 0) {}

  std::size_t num_classes() const { return num_classes_; }
  // Rows are true classes, columns predicted classes.
  std::size_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * num_classes_ + predicted];
  }
  void add(std::size_t truth, std::size_t predicted);

  std::size_t total() const;
  std::size_t trace() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t num_classes_;
  std::vector<std::size_t> counts_;
};

// Throws InvalidInput on length mismatch or out-of-range labels.
ConfusionMatrix confusion(std::span<const std::size_t> true_labels,
                          std::span<const std::size_t> predicted_labels,
                          std::size_t num_classes);

struct ClassPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // A 0/0 ratio occurred and was defined as 0.
  bool degenerate = false;
};

ClassPrf class_prf(const ConfusionMatrix& matrix, std::size_t cls);

struct MacroSummary {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassPrf> per_class;
};

// Unweighted class means; throws InvalidInput when the matrix is empty.
MacroSummary macro(const ConfusionMatrix& matrix);

// Fraction of (positive, negative) pairs ranked correctly. nullopt when either
// side is empty.
std::optional<double> auc_binary(std::span<const double> scores, std::span<const bool> positives);

struct MacroAuc {
  double value = 0.0;
  std::vector<std::optional<double>> per_class;
  std::size_t undefined_classes = 0;
};

// probs holds one column per sample. Classes with no positives or no negatives
// are left out of the mean and counted. Throws InvalidInput when fewer than two
// distinct classes are present.
MacroAuc macro_auc_ovr(const Eigen::MatrixXd& probs, std::span<const std::size_t> true_labels);

inline constexpr const char* kAucVariant = "one-vs-rest macro, Mann-Whitney with half-credit ties";

struct MetricsReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> macro_auc;
  std::vector<ClassPrf> per_class;
  std::vector<std::optional<double>> per_class_auc;
  std::size_t auc_undefined_classes = 0;
  ConfusionMatrix confusion;
  std::optional<double> gender_accuracy;
  std::size_t sample_count = 0;
};

// Everything above for one evaluated split. macro_auc is empty when fewer than
// two classes occur in true_labels.
MetricsReport build_report(std::span<const std::size_t> true_labels,
                           std::span<const std::size_t> predicted_labels,
                           const Eigen::MatrixXd& probs);

}  // namespace twostage

#endif  // TWOSTAGE_METRICS_HPP_
