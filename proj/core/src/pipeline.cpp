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

#include "twostage/pipeline.hpp"

#include <cmath>
#include <cstdio>

#include "twostage/binary_io.hpp"
#include "twostage/checkpoint.hpp"
#include "twostage/error.hpp"
#include "twostage/hash.hpp"
#include "twostage/json_io.hpp"

namespace twostage {

std::string_view to_string(SelectionMetric m) {
  return m == SelectionMetric::kAccuracy ? "accuracy" : "macro_f1";
}

std::optional<SelectionMetric> parse_selection_metric(std::string_view s) {
  if (s == "macro_f1") return SelectionMetric::kMacroF1;
  if (s == "accuracy") return SelectionMetric::kAccuracy;
  return std::nullopt;
}

LrSchedule ScheduleConfig::resolve(std::size_t total_steps) const {
  LrSchedule s;
  s.peak_lr = peak_lr;
  s.min_lr = peak_lr * min_lr_ratio;
  s.total_steps = total_steps;
  s.warmup_steps =
      static_cast<std::size_t>(std::floor(warmup_fraction * static_cast<double>(total_steps)));
  s.validate();
  return s;
}

TrainConfig TrainConfig::paper_profile() { return TrainConfig{}; }

TrainConfig TrainConfig::desk_profile() {
  TrainConfig c;
  c.epochs = 30;
  return c;
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(schedule.peak_lr >= 0.0) || !std::isfinite(schedule.peak_lr)) {
    throw ConfigError("peak_lr must be a non-negative number");
  }
  if (!(schedule.min_lr_ratio >= 0.0 && schedule.min_lr_ratio <= 1.0)) {
    throw ConfigError("min_lr_ratio must lie in [0, 1]");
  }
  if (!(schedule.warmup_fraction >= 0.0 && schedule.warmup_fraction < 1.0)) {
    throw ConfigError("warmup_fraction must lie in [0, 1)");
  }
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw ConfigError("hidden widths must be positive");
  }
  preprocess.validate();
}

std::size_t disease_label(const Sample& s) { return index_of(s.disease); }
std::size_t gender_label(const Sample& s) { return index_of(s.gender); }

FeatureSet featurize_split(const Dataset& dataset, Split split, const PreprocessConfig& config,
                           const LabelExtractor& label) {
  FeatureSet out;
  const auto n = dataset.count(split);
  out.inputs.resize(static_cast<Eigen::Index>(config.feature_length()),
                    static_cast<Eigen::Index>(n));
  out.labels.reserve(n);
  Eigen::Index col = 0;
  for (const auto& s : dataset.samples()) {
    if (s.split != split) continue;
    const auto features = featurize(s.volume, config);
    out.inputs.col(col++) = Eigen::Map<const Eigen::VectorXd>(
        features.data(), static_cast<Eigen::Index>(features.size()));
    out.labels.push_back(label(s));
  }
  return out;
}

namespace {

std::vector<std::size_t> predicted_labels(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  const Eigen::MatrixXd logits = forward_logits(model, inputs);
  std::vector<std::size_t> out(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < logits.rows(); ++r) {
      if (logits(r, j) > logits(best, j)) best = r;
    }
    out[static_cast<std::size_t>(j)] = static_cast<std::size_t>(best);
  }
  return out;
}

std::vector<std::size_t> layer_dims_for(std::size_t input, const std::vector<std::size_t>& hidden,
                                        std::size_t head) {
  std::vector<std::size_t> dims{input};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(head);
  return dims;
}

}  // namespace

TrainResult train_on_features(const FeatureSet& train, const FeatureSet& val,
                              std::size_t head_width, const TrainConfig& config,
                              std::span<const double> class_weights, Stream init_stream) {
  config.validate();
  if (train.size() == 0) throw InvalidInput("training split is empty");
  if (val.size() == 0) throw InvalidInput("validation split is empty");
  for (const auto* set : {&train, &val}) {
    for (std::size_t y : set->labels) {
      if (y >= head_width) {
        throw InvalidInput("label " + std::to_string(y) + " outside head width " +
                           std::to_string(head_width));
      }
    }
  }

  const auto input_dim = static_cast<std::size_t>(train.inputs.rows());
  Rng init_rng(config.seed, init_stream);
  TrainResult result;
  result.model =
      MlpModel::initialized(layer_dims_for(input_dim, config.hidden_dims, head_width), init_rng);
  result.initial_model = result.model;
  result.class_weights.assign(class_weights.begin(), class_weights.end());
  result.train_count = train.size();

  const std::size_t steps_per_epoch = (train.size() + config.batch_size - 1) / config.batch_size;
  result.schedule = config.schedule.resolve(steps_per_epoch * config.epochs);
  const std::uint64_t order_seed =
      mix_seed(config.seed, static_cast<std::uint64_t>(Stream::kBatchOrder),
               static_cast<std::uint64_t>(init_stream));

  MlpModel model = result.model;
  AdamState adam = AdamState::for_model(model);
  double best_value = -1.0;
  std::size_t step = 0;
  Batch batch;
  Gradients grads;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    double lr = 0.0;
    for (const auto& indices : batches(train.size(), config.batch_size, order_seed, epoch)) {
      batch.inputs.resize(train.inputs.rows(), static_cast<Eigen::Index>(indices.size()));
      batch.labels.resize(indices.size());
      for (std::size_t i = 0; i < indices.size(); ++i) {
        batch.inputs.col(static_cast<Eigen::Index>(i)) =
            train.inputs.col(static_cast<Eigen::Index>(indices[i]));
        batch.labels[i] = train.labels[indices[i]];
      }
      lr = lr_at(result.schedule, step);
      const double loss = train_step(model, batch, class_weights, adam, lr, grads);
      if (!std::isfinite(loss)) {
        char msg[160];
        std::snprintf(msg, sizeof msg, "non-finite training loss at step %zu (epoch %zu, lr %.6g)",
                      step, epoch + 1, lr);
        throw NumericError(msg);
      }
      result.steps.push_back({epoch + 1, step, lr, loss});
      loss_sum += loss;
      ++step;
    }

    const auto predicted = predicted_labels(model, val.inputs);
    const MacroSummary summary = macro(confusion(val.labels, predicted, head_width));
    EpochRecord record;
    record.epoch = epoch + 1;
    record.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
    record.last_lr = lr;
    record.val_accuracy = summary.accuracy;
    record.val_macro_f1 = summary.macro_f1;
    record.selection_value = config.selection_metric == SelectionMetric::kAccuracy
                                 ? summary.accuracy
                                 : summary.macro_f1;
    result.history.push_back(record);
    if (record.selection_value > best_value) {
      best_value = record.selection_value;
      result.best_epoch = record.epoch;
      result.model = model;
    }
  }
  return result;
}

TrainResult train_classifier(const Dataset& dataset, std::size_t head_width,
                             const LabelExtractor& label, const TrainConfig& config,
                             std::span<const double> class_weights, Stream init_stream) {
  config.validate();
  if (dataset.count(Split::kTrain) == 0) throw InvalidInput("training split is empty");
  if (dataset.count(Split::kVal) == 0) throw InvalidInput("validation split is empty");
  const FeatureSet train = featurize_split(dataset, Split::kTrain, config.preprocess, label);
  const FeatureSet val = featurize_split(dataset, Split::kVal, config.preprocess, label);
  return train_on_features(train, val, head_width, config, class_weights, init_stream);
}

void TwoStageModel::validate() const {
  if (gender_model.layer_dims().empty() || male_disease_model.layer_dims().empty() ||
      female_disease_model.layer_dims().empty()) {
    throw FormatError("two-stage model is missing a classifier");
  }
  if (gender_model.output_dim() != kNumGenders ||
      male_disease_model.output_dim() != kNumDiseases ||
      female_disease_model.output_dim() != kNumDiseases) {
    throw FormatError("two-stage heads must be 2/4/4 wide");
  }
  const std::size_t n = preprocess.feature_length();
  if (gender_model.input_dim() != n || male_disease_model.input_dim() != n ||
      female_disease_model.input_dim() != n) {
    throw FormatError("classifier input width does not match the preprocessing output");
  }
}

void BaselineModel::validate() const {
  if (disease_model.layer_dims().empty() || disease_model.output_dim() != kNumDiseases) {
    throw FormatError("baseline head must be 4 wide");
  }
  if (disease_model.input_dim() != preprocess.feature_length()) {
    throw FormatError("classifier input width does not match the preprocessing output");
  }
}

TwoStageTraining train_two_stage(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  const FeatureSet train_gender =
      featurize_split(dataset, Split::kTrain, config.preprocess, gender_label);
  const FeatureSet val_gender = featurize_split(dataset, Split::kVal, config.preprocess, gender_label);

  // Partition by the recorded gender. Predicted gender is only used at
  // inference time.
  const auto partition = [](const FeatureSet& by_gender, const std::vector<std::size_t>& diseases,
                            Gender g) {
    std::vector<std::size_t> columns;
    for (std::size_t i = 0; i < by_gender.size(); ++i) {
      if (by_gender.labels[i] == index_of(g)) columns.push_back(i);
    }
    FeatureSet out;
    out.inputs.resize(by_gender.inputs.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t i = 0; i < columns.size(); ++i) {
      out.inputs.col(static_cast<Eigen::Index>(i)) =
          by_gender.inputs.col(static_cast<Eigen::Index>(columns[i]));
      out.labels.push_back(diseases[columns[i]]);
    }
    return out;
  };
  std::vector<std::size_t> train_disease;
  std::vector<std::size_t> val_disease;
  for (const auto& s : dataset.samples()) {
    (s.split == Split::kTrain ? train_disease : val_disease).push_back(disease_label(s));
  }

  const FeatureSet male_train = partition(train_gender, train_disease, Gender::kMale);
  const FeatureSet female_train = partition(train_gender, train_disease, Gender::kFemale);
  const FeatureSet male_val = partition(val_gender, val_disease, Gender::kMale);
  const FeatureSet female_val = partition(val_gender, val_disease, Gender::kFemale);
  for (const auto& [name, set] : {std::pair{"male training", &male_train},
                                  std::pair{"female training", &female_train},
                                  std::pair{"male validation", &male_val},
                                  std::pair{"female validation", &female_val}}) {
    if (set->size() == 0) throw InvalidInput(std::string(name) + " subset is empty");
  }

  TwoStageTraining out;
  out.gender = train_on_features(train_gender, val_gender, kNumGenders, config, {},
                                 Stream::kInitGender);

  out.male_weights = class_weights(male_train.labels, kNumDiseases);
  out.female_weights = class_weights(female_train.labels, kNumDiseases);
  const auto weights_for = [&](const ClassWeights& w) {
    return config.use_class_weights ? std::span<const double>(w.weights)
                                    : std::span<const double>();
  };
  out.male = train_on_features(male_train, male_val, kNumDiseases, config,
                               weights_for(out.male_weights), Stream::kInitMale);
  out.female = train_on_features(female_train, female_val, kNumDiseases, config,
                                 weights_for(out.female_weights), Stream::kInitFemale);

  out.model.gender_model = out.gender.model;
  out.model.male_disease_model = out.male.model;
  out.model.female_disease_model = out.female.model;
  out.model.preprocess = config.preprocess;
  return out;
}

BaselineTraining train_baseline(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  const FeatureSet train = featurize_split(dataset, Split::kTrain, config.preprocess, disease_label);
  const FeatureSet val = featurize_split(dataset, Split::kVal, config.preprocess, disease_label);
  if (train.size() == 0) throw InvalidInput("training split is empty");
  BaselineTraining out;
  out.weights = class_weights(train.labels, kNumDiseases);
  const std::span<const double> weights =
      config.use_class_weights ? std::span<const double>(out.weights.weights)
                               : std::span<const double>();
  out.disease = train_on_features(train, val, kNumDiseases, config, weights, Stream::kInitBaseline);
  out.model.disease_model = out.disease.model;
  out.model.preprocess = config.preprocess;
  return out;
}

Prediction predict_features(const TwoStageModel& model, std::span<const double> features,
                            std::optional<Gender> route_override) {
  Prediction p;
  p.gender_probs = softmax(forward(model.gender_model, features).logits);
  p.routed_gender = route_override.value_or(p.gender_probs.argmax() == index_of(Gender::kMale)
                                                ? Gender::kMale
                                                : Gender::kFemale);
  const MlpModel& expert =
      p.routed_gender == Gender::kMale ? model.male_disease_model : model.female_disease_model;
  p.disease_probs = softmax(forward(expert, features).logits);
  p.disease = kAllDiseases[p.disease_probs.argmax()];
  return p;
}

Prediction predict_two_stage(const TwoStageModel& model, const Volume& volume) {
  return predict_features(model, featurize(volume, model.preprocess));
}

ProbVector predict_baseline_features(const BaselineModel& model, std::span<const double> features) {
  return softmax(forward(model.disease_model, features).logits);
}

namespace {

template <typename PerSample>
MetricsReport evaluate_split(const Dataset& dataset, Split split,
                             const PreprocessConfig& preprocess, PerSample&& per_sample) {
  const std::size_t n = dataset.count(split);
  if (n == 0) throw InvalidInput(std::string("split '") + std::string(to_string(split)) + "' is empty");
  std::vector<std::size_t> truth;
  std::vector<std::size_t> predicted;
  Eigen::MatrixXd probs(static_cast<Eigen::Index>(kNumDiseases), static_cast<Eigen::Index>(n));
  for (const auto& s : dataset.samples()) {
    if (s.split != split) continue;
    const auto features = featurize(s.volume, preprocess);
    const ProbVector p = per_sample(s, features);
    probs.col(static_cast<Eigen::Index>(truth.size())) = p.values();
    truth.push_back(disease_label(s));
    predicted.push_back(p.argmax());
  }
  return build_report(truth, predicted, probs);
}

}  // namespace

MetricsReport evaluate(const TwoStageModel& model, const Dataset& dataset, Split split,
                       Routing routing) {
  model.validate();
  std::size_t gender_correct = 0;
  MetricsReport report = evaluate_split(
      dataset, split, model.preprocess, [&](const Sample& s, const std::vector<double>& features) {
        const auto route =
            routing == Routing::kTrueGender ? std::optional<Gender>(s.gender) : std::nullopt;
        Prediction p = predict_features(model, features, route);
        if (p.gender_probs.argmax() == index_of(s.gender)) ++gender_correct;
        return p.disease_probs;
      });
  report.gender_accuracy =
      static_cast<double>(gender_correct) / static_cast<double>(report.sample_count);
  return report;
}

MetricsReport evaluate(const BaselineModel& model, const Dataset& dataset, Split split) {
  model.validate();
  return evaluate_split(dataset, split, model.preprocess,
                        [&](const Sample&, const std::vector<double>& features) {
                          return predict_baseline_features(model, features);
                        });
}

namespace {

constexpr int kCheckpointFormatVersion = 1;

Json model_entry(const TrainResult& result, const std::string& file) {
  Json j;
  j["file"] = file;
  j["layer_dims"] = result.model.layer_dims();
  j["train_count"] = result.train_count;
  j["best_epoch"] = result.best_epoch;
  j["class_weights"] = result.class_weights;
  j["schedule"] = {{"peak_lr", result.schedule.peak_lr},
                   {"min_lr", result.schedule.min_lr},
                   {"warmup_steps", result.schedule.warmup_steps},
                   {"total_steps", result.schedule.total_steps}};
  Json history = Json::array();
  for (const auto& r : result.history) history.push_back(to_json(r));
  j["history"] = history;
  return j;
}

void append_log(std::string& csv, const std::string& name, const TrainResult& result) {
  char line[160];
  for (const auto& s : result.steps) {
    std::snprintf(line, sizeof line, "%s,%zu,%zu,%.17g,%.17g\n", name.c_str(), s.epoch, s.step,
                  s.lr, s.loss);
    csv += line;
  }
}

void prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_common(const std::filesystem::path& dir, const TrainConfig& config, Json metadata,
                  const nlohmann::json& provenance, const std::string& log) {
  const std::string config_text = to_json(config).dump();
  metadata["seed"] = config.seed;
  metadata["config"] = to_json(config);
  metadata["config_hash"] = sha256_hex(config_text);
  if (!provenance.is_null()) metadata["provenance"] = provenance;
  binary::write_file(dir / "preprocess.json", to_json(config.preprocess).dump(2) + "\n");
  binary::write_file(dir / "metadata.json", metadata.dump(2) + "\n");
  binary::write_file(dir / "train_log.csv", "model,epoch,step,lr,loss\n" + log);
}

Json read_metadata(const std::filesystem::path& dir) {
  return parse_json(binary::read_file(dir / "metadata.json"), (dir / "metadata.json").string());
}

}  // namespace

void save_checkpoint(const TwoStageTraining& training, const TrainConfig& config,
                     const std::filesystem::path& dir, const nlohmann::json& provenance) {
  prepare_dir(dir);
  save_model(training.model.gender_model, dir / "gender.lmlp");
  save_model(training.model.male_disease_model, dir / "male.lmlp");
  save_model(training.model.female_disease_model, dir / "female.lmlp");
  Json meta;
  meta["kind"] = "two_stage";
  meta["format_version"] = kCheckpointFormatVersion;
  meta["models"] = {{"gender", model_entry(training.gender, "gender.lmlp")},
                    {"male", model_entry(training.male, "male.lmlp")},
                    {"female", model_entry(training.female, "female.lmlp")}};
  meta["empty_classes"] = {{"male", training.male_weights.empty_classes},
                           {"female", training.female_weights.empty_classes}};
  std::string log;
  append_log(log, "gender", training.gender);
  append_log(log, "male", training.male);
  append_log(log, "female", training.female);
  write_common(dir, config, std::move(meta), provenance, log);
}

void save_checkpoint(const BaselineTraining& training, const TrainConfig& config,
                     const std::filesystem::path& dir, const nlohmann::json& provenance) {
  prepare_dir(dir);
  save_model(training.model.disease_model, dir / "baseline.lmlp");
  Json meta;
  meta["kind"] = "baseline";
  meta["format_version"] = kCheckpointFormatVersion;
  meta["models"] = {{"baseline", model_entry(training.disease, "baseline.lmlp")}};
  meta["empty_classes"] = {{"baseline", training.weights.empty_classes}};
  std::string log;
  append_log(log, "baseline", training.disease);
  write_common(dir, config, std::move(meta), provenance, log);
}

CheckpointKind checkpoint_kind(const std::filesystem::path& dir) {
  const auto meta = read_metadata(dir);
  const std::string kind = meta.value("kind", "");
  if (kind == "two_stage") return CheckpointKind::kTwoStage;
  if (kind == "baseline") return CheckpointKind::kBaseline;
  throw FormatError(dir.string() + ": unknown checkpoint kind '" + kind + "'");
}

TwoStageModel load_two_stage(const std::filesystem::path& dir) {
  if (checkpoint_kind(dir) != CheckpointKind::kTwoStage) {
    throw FormatError(dir.string() + " is not a two-stage checkpoint");
  }
  TwoStageModel model;
  model.gender_model = load_model(dir / "gender.lmlp");
  model.male_disease_model = load_model(dir / "male.lmlp");
  model.female_disease_model = load_model(dir / "female.lmlp");
  model.preprocess = preprocess_config_from_json(
      parse_json(binary::read_file(dir / "preprocess.json"), "preprocess.json"));
  model.validate();
  return model;
}

BaselineModel load_baseline(const std::filesystem::path& dir) {
  if (checkpoint_kind(dir) != CheckpointKind::kBaseline) {
    throw FormatError(dir.string() + " is not a baseline checkpoint");
  }
  BaselineModel model;
  model.disease_model = load_model(dir / "baseline.lmlp");
  model.preprocess = preprocess_config_from_json(
      parse_json(binary::read_file(dir / "preprocess.json"), "preprocess.json"));
  model.validate();
  return model;
}

}  // namespace twostage
