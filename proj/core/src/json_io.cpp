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

#include "twostage/json_io.hpp"

#include <set>

#include "twostage/error.hpp"

namespace twostage {
namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

double get_number(const nlohmann::json& j, const char* key, double fallback,
                  const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return j[key].get<double>();
}

std::uint64_t get_count(const nlohmann::json& j, const char* key, std::uint64_t fallback,
                        const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j[key];
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    throw ConfigError(where + "." + key + ": must be non-negative, got " + v.dump());
  }
  throw ConfigError(where + "." + key + ": expected a non-negative integer");
}

VolumeDims dims_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError(where + ": expected [depth, height, width]");
  }
  VolumeDims d;
  std::size_t* fields[] = {&d.depth, &d.height, &d.width};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j[i].is_number_unsigned() || j[i].get<std::uint64_t>() == 0) {
      throw ConfigError(where + ": dims must be positive integers");
    }
    *fields[i] = j[i].get<std::size_t>();
  }
  return d;
}

}  // namespace

nlohmann::json parse_json(std::string_view text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

Json to_json(const VolumeDims& dims) { return Json::array({dims.depth, dims.height, dims.width}); }

Json to_json(const PreprocessConfig& config) {
  Json j;
  j["trim_low_frac"] = config.trim_low_frac;
  j["trim_high_frac"] = config.trim_high_frac;
  j["target_dims"] = to_json(config.target_dims);
  j["normalization"] = to_string(config.normalization);
  return j;
}

PreprocessConfig preprocess_config_from_json(const nlohmann::json& j) {
  const std::string where = "preprocess";
  reject_unknown(j, {"trim_low_frac", "trim_high_frac", "target_dims", "normalization"}, where);
  PreprocessConfig c;
  c.trim_low_frac = get_number(j, "trim_low_frac", c.trim_low_frac, where);
  c.trim_high_frac = get_number(j, "trim_high_frac", c.trim_high_frac, where);
  if (j.contains("target_dims")) c.target_dims = dims_from_json(j["target_dims"], where + ".target_dims");
  if (j.contains("normalization")) {
    const auto& n = j["normalization"];
    const auto mode = n.is_string() ? parse_normalization(n.get<std::string>()) : std::nullopt;
    if (!mode) throw ConfigError(where + ".normalization: expected zscore, minmax or none");
    c.normalization = *mode;
  }
  c.validate();
  return c;
}

Json to_json(const CohortSpec& spec) {
  Json j;
  j["seed"] = spec.seed;
  j["noise_sigma"] = spec.noise_sigma;
  j["gender_shift"] = spec.gender_shift;
  j["class_separation"] = spec.class_separation;
  j["dims"] = to_json(spec.dims);
  Json counts;
  for (Disease d : kAllDiseases) {
    Json cell;
    for (Split s : {Split::kTrain, Split::kVal}) {
      Json by_gender;
      for (Gender g : {Gender::kFemale, Gender::kMale}) {
        by_gender[std::string(to_string(g))] =
            spec.counts[index_of(d)][index_of(g)][static_cast<std::size_t>(s)];
      }
      cell[std::string(to_string(s))] = by_gender;
    }
    counts[std::string(to_string(d))] = cell;
  }
  j["counts"] = counts;
  return j;
}

CohortSpec cohort_spec_from_json(const nlohmann::json& j) {
  const std::string where = "cohort";
  reject_unknown(j, {"seed", "noise_sigma", "gender_shift", "class_separation", "dims", "counts"},
                 where);
  CohortSpec spec;
  spec.seed = get_count(j, "seed", spec.seed, where);
  spec.noise_sigma = get_number(j, "noise_sigma", spec.noise_sigma, where);
  spec.gender_shift = get_number(j, "gender_shift", spec.gender_shift, where);
  spec.class_separation = get_number(j, "class_separation", spec.class_separation, where);
  if (j.contains("dims")) spec.dims = dims_from_json(j["dims"], where + ".dims");
  if (j.contains("counts")) {
    const auto& counts = j["counts"];
    reject_unknown(counts, {"adenocarcinoma", "squamous_cell_carcinoma", "covid19", "normal"},
                   where + ".counts");
    for (Disease d : kAllDiseases) {
      const std::string dname(to_string(d));
      if (!counts.contains(dname)) continue;
      const std::string dwhere = where + ".counts." + dname;
      reject_unknown(counts[dname], {"train", "val"}, dwhere);
      for (Split s : {Split::kTrain, Split::kVal}) {
        const std::string sname(to_string(s));
        if (!counts[dname].contains(sname)) continue;
        const auto& cell = counts[dname][sname];
        reject_unknown(cell, {"F", "M"}, dwhere + "." + sname);
        for (Gender g : {Gender::kFemale, Gender::kMale}) {
          auto& slot = spec.counts[index_of(d)][index_of(g)][static_cast<std::size_t>(s)];
          slot = get_count(cell, std::string(to_string(g)).c_str(), slot, dwhere + "." + sname);
        }
      }
    }
  }
  spec.validate();
  return spec;
}

Json to_json(const ScheduleConfig& schedule) {
  Json j;
  j["peak_lr"] = schedule.peak_lr;
  j["min_lr_ratio"] = schedule.min_lr_ratio;
  j["warmup_fraction"] = schedule.warmup_fraction;
  return j;
}

Json to_json(const TrainConfig& config) {
  Json j;
  j["epochs"] = config.epochs;
  j["batch_size"] = config.batch_size;
  j["schedule"] = to_json(config.schedule);
  j["seed"] = config.seed;
  j["preprocess"] = to_json(config.preprocess);
  j["hidden_dims"] = config.hidden_dims;
  j["selection_metric"] = to_string(config.selection_metric);
  j["use_class_weights"] = config.use_class_weights;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  const std::string where = "train";
  reject_unknown(j, {"epochs", "batch_size", "schedule", "seed", "preprocess", "hidden_dims",
                     "selection_metric", "use_class_weights"},
                 where);
  TrainConfig c = TrainConfig::paper_profile();
  c.epochs = get_count(j, "epochs", c.epochs, where);
  c.batch_size = get_count(j, "batch_size", c.batch_size, where);
  c.seed = get_count(j, "seed", c.seed, where);
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    reject_unknown(s, {"peak_lr", "min_lr_ratio", "warmup_fraction"}, where + ".schedule");
    c.schedule.peak_lr = get_number(s, "peak_lr", c.schedule.peak_lr, where + ".schedule");
    c.schedule.min_lr_ratio =
        get_number(s, "min_lr_ratio", c.schedule.min_lr_ratio, where + ".schedule");
    c.schedule.warmup_fraction =
        get_number(s, "warmup_fraction", c.schedule.warmup_fraction, where + ".schedule");
  }
  if (j.contains("preprocess")) c.preprocess = preprocess_config_from_json(j["preprocess"]);
  if (j.contains("hidden_dims")) {
    const auto& h = j["hidden_dims"];
    if (!h.is_array()) throw ConfigError(where + ".hidden_dims: expected an array");
    c.hidden_dims.clear();
    for (const auto& d : h) {
      if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0) {
        throw ConfigError(where + ".hidden_dims: widths must be positive integers");
      }
      c.hidden_dims.push_back(d.get<std::size_t>());
    }
  }
  if (j.contains("selection_metric")) {
    const auto& m = j["selection_metric"];
    const auto metric = m.is_string() ? parse_selection_metric(m.get<std::string>()) : std::nullopt;
    if (!metric) throw ConfigError(where + ".selection_metric: expected macro_f1 or accuracy");
    c.selection_metric = *metric;
  }
  if (j.contains("use_class_weights")) {
    if (!j["use_class_weights"].is_boolean()) {
      throw ConfigError(where + ".use_class_weights: expected a boolean");
    }
    c.use_class_weights = j["use_class_weights"].get<bool>();
  }
  c.validate();
  return c;
}

Json to_json(const EpochRecord& record) {
  Json j;
  j["epoch"] = record.epoch;
  j["train_loss"] = record.train_loss;
  j["last_lr"] = record.last_lr;
  j["val_accuracy"] = record.val_accuracy;
  j["val_macro_f1"] = record.val_macro_f1;
  j["selection_value"] = record.selection_value;
  return j;
}

std::vector<std::string> disease_class_names() {
  std::vector<std::string> names;
  for (Disease d : kAllDiseases) names.emplace_back(to_string(d));
  return names;
}

Json report_to_json(const MetricsReport& report, std::span<const std::string> class_names) {
  const auto num_classes = report.confusion.num_classes();
  const auto name = [&](std::size_t c) {
    return c < class_names.size() ? class_names[c] : std::to_string(c);
  };
  const auto optional_number = [](const std::optional<double>& v) -> Json {
    return v ? Json(*v) : Json(nullptr);
  };

  Json j;
  j["sample_count"] = report.sample_count;
  j["accuracy"] = report.accuracy;
  j["macro_precision"] = report.macro_precision;
  j["macro_recall"] = report.macro_recall;
  j["macro_f1"] = report.macro_f1;
  j["macro_auc"] = optional_number(report.macro_auc);
  j["auc_variant"] = kAucVariant;
  j["auc_undefined_classes"] = report.auc_undefined_classes;
  j["gender_accuracy"] = optional_number(report.gender_accuracy);

  Json per_class = Json::array();
  for (std::size_t c = 0; c < num_classes; ++c) {
    Json entry;
    entry["class"] = name(c);
    entry["precision"] = report.per_class[c].precision;
    entry["recall"] = report.per_class[c].recall;
    entry["f1"] = report.per_class[c].f1;
    entry["degenerate"] = report.per_class[c].degenerate;
    entry["auc"] = c < report.per_class_auc.size() ? optional_number(report.per_class_auc[c])
                                                   : Json(nullptr);
    per_class.push_back(entry);
  }
  j["per_class"] = per_class;

  Json labels = Json::array();
  Json rows = Json::array();
  for (std::size_t t = 0; t < num_classes; ++t) {
    labels.push_back(name(t));
    Json row = Json::array();
    for (std::size_t p = 0; p < num_classes; ++p) row.push_back(report.confusion.at(t, p));
    rows.push_back(row);
  }
  j["confusion"] = {{"labels", labels}, {"counts", rows}};
  return j;
}

}  // namespace twostage
