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

// The two-stage routed classifier and its single-classifier baseline.
//
// Training: a gender classifier is fit on every training sample with plain
// cross-entropy. The training and validation sets are then partitioned by the
// recorded (true) gender, and one disease classifier per gender is fit on its
// partition with class-weighted cross-entropy.
//
// Inference: the gender classifier's argmax picks which disease classifier
// sees the sample. Only the selected classifier's probabilities are reported.

#ifndef TWOSTAGE_PIPELINE_HPP_
#define TWOSTAGE_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "twostage/data.hpp"
#include "twostage/metrics.hpp"
#include "twostage/nncore.hpp"
#include "twostage/preprocess.hpp"

namespace twostage {

enum class SelectionMetric { kMacroF1, kAccuracy };

std::string_view to_string(SelectionMetric m);
std::optional<SelectionMetric> parse_selection_metric(std::string_view s);

struct ScheduleConfig {
  double peak_lr = 1e-4;
  // min_lr = peak_lr * min_lr_ratio
  double min_lr_ratio = 0.01;
  // warmup_steps = floor(total_steps * warmup_fraction)
  double warmup_fraction = 0.05;

  LrSchedule resolve(std::size_t total_steps) const;
  bool operator==(const ScheduleConfig&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 8;
  ScheduleConfig schedule;
  std::uint64_t seed = 0;
  PreprocessConfig preprocess;
  std::vector<std::size_t> hidden_dims{256, 64};
  SelectionMetric selection_metric = SelectionMetric::kMacroF1;
  // Applies to disease classifiers; the gender classifier is always unweighted.
  bool use_class_weights = true;

  // 100 epochs, batch 8, peak lr 1e-4.
  static TrainConfig paper_profile();
  // Same, with 30 epochs.
  static TrainConfig desk_profile();

  // Throws ConfigError.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Preprocessed inputs, one column per sample, with their class labels.
struct FeatureSet {
  Eigen::MatrixXd inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
};

using LabelExtractor = std::function<std::size_t(const Sample&)>;

std::size_t disease_label(const Sample& s);
std::size_t gender_label(const Sample& s);

FeatureSet featurize_split(const Dataset& dataset, Split split, const PreprocessConfig& config,
                           const LabelExtractor& label);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double last_lr = 0.0;
  double val_accuracy = 0.0;
  double val_macro_f1 = 0.0;
  double selection_value = 0.0;
};

struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  MlpModel model;  // best validation snapshot
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
  std::vector<StepRecord> steps;
  LrSchedule schedule;
  std::vector<double> class_weights;
  MlpModel initial_model;
  std::size_t train_count = 0;
};

// Adam over seeded mini-batches with the warmup + cosine schedule. After each
// epoch the validation set is scored and the best snapshot kept (earliest epoch
// on ties). An empty class_weights span trains unweighted. init_stream selects
// the initialization and batch-order streams.
TrainResult train_on_features(const FeatureSet& train, const FeatureSet& val,
                              std::size_t head_width, const TrainConfig& config,
                              std::span<const double> class_weights, Stream init_stream);

TrainResult train_classifier(const Dataset& dataset, std::size_t head_width,
                             const LabelExtractor& label, const TrainConfig& config,
                             std::span<const double> class_weights,
                             Stream init_stream = Stream::kInitBaseline);

struct TwoStageModel {
  MlpModel gender_model;          // 2-way head, index 0 female
  MlpModel male_disease_model;    // 4-way head
  MlpModel female_disease_model;  // 4-way head
  PreprocessConfig preprocess;

  // Head widths and shared input width; throws FormatError.
  void validate() const;
};

struct BaselineModel {
  MlpModel disease_model;
  PreprocessConfig preprocess;

  void validate() const;
};

struct TwoStageTraining {
  TwoStageModel model;
  TrainResult gender;
  TrainResult male;
  TrainResult female;
  ClassWeights male_weights;
  ClassWeights female_weights;
};

struct BaselineTraining {
  BaselineModel model;
  TrainResult disease;
  ClassWeights weights;
};

TwoStageTraining train_two_stage(const Dataset& dataset, const TrainConfig& config);
BaselineTraining train_baseline(const Dataset& dataset, const TrainConfig& config);

struct Prediction {
  ProbVector gender_probs;
  Gender routed_gender = Gender::kFemale;
  ProbVector disease_probs;
  Disease disease = Disease::kNormal;
};

// Routes on the gender classifier, or on route_override when given (used to
// study the cascade with a perfect gender stage).
Prediction predict_features(const TwoStageModel& model, std::span<const double> features,
                            std::optional<Gender> route_override = std::nullopt);
Prediction predict_two_stage(const TwoStageModel& model, const Volume& volume);

ProbVector predict_baseline_features(const BaselineModel& model, std::span<const double> features);

enum class Routing { kPredictedGender, kTrueGender };

MetricsReport evaluate(const TwoStageModel& model, const Dataset& dataset, Split split,
                       Routing routing = Routing::kPredictedGender);
MetricsReport evaluate(const BaselineModel& model, const Dataset& dataset, Split split);

// Checkpoint directories. Two-stage: gender.lmlp, male.lmlp, female.lmlp;
// baseline: baseline.lmlp. Both add preprocess.json, metadata.json and
// train_log.csv. `provenance` is copied into metadata.json verbatim.
enum class CheckpointKind { kTwoStage, kBaseline };

void save_checkpoint(const TwoStageTraining& training, const TrainConfig& config,
                     const std::filesystem::path& dir, const nlohmann::json& provenance = {});
void save_checkpoint(const BaselineTraining& training, const TrainConfig& config,
                     const std::filesystem::path& dir, const nlohmann::json& provenance = {});

CheckpointKind checkpoint_kind(const std::filesystem::path& dir);
TwoStageModel load_two_stage(const std::filesystem::path& dir);
BaselineModel load_baseline(const std::filesystem::path& dir);

}  // namespace twostage

#endif  // TWOSTAGE_PIPELINE_HPP_
