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

#include "twostage_cli/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

#include "twostage/metrics.hpp"
#include "twostage/nncore.hpp"
#include "twostage/pipeline.hpp"
#include "twostage/random.hpp"

namespace twostage::cli {
namespace {

constexpr std::size_t kGradCases = 20;
constexpr std::size_t kLossPairs = 1000;
constexpr std::size_t kMetricCases = 200;
constexpr std::size_t kRoutingSamples = 155;

std::uint64_t case_seed(std::uint64_t base, std::uint64_t index) {
  return mix_seed(base, static_cast<std::uint64_t>(Stream::kVerify), index);
}

std::string format(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// Smallest |pre-activation| over the hidden units, so that cases sitting on a
// rectifier kink can be redrawn.
double min_hidden_margin(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  double margin = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd a = inputs;
  const auto& layers = model.layers();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weight * a;
    z.colwise() += layers[l].bias;
    margin = std::min(margin, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return margin;
}

CheckResult grad_case(std::uint64_t base, std::size_t index, bool inject_fault) {
  const std::uint64_t seed = case_seed(base, index);
  Rng rng(seed);
  std::vector<std::size_t> dims;
  std::size_t params = 0;
  do {
    dims = {2 + rng.below(23)};
    const std::size_t hidden = 1 + rng.below(2);
    for (std::size_t h = 0; h < hidden; ++h) dims.push_back(2 + rng.below(31));
    dims.push_back(2 + rng.below(4));
    params = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) params += dims[l + 1] * (dims[l] + 1);
  } while (params > 2000);

  MlpModel model = MlpModel::initialized(dims, rng);
  for (auto& layer : model.layers()) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.uniform(-0.1, 0.1);
  }

  const std::size_t batch_size = 1 + rng.below(8);
  Batch batch;
  batch.inputs.resize(static_cast<Eigen::Index>(dims.front()),
                      static_cast<Eigen::Index>(batch_size));
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (Eigen::Index i = 0; i < batch.inputs.size(); ++i) batch.inputs.data()[i] = rng.normal();
    if (min_hidden_margin(model, batch.inputs) > 1e-3) break;
  }
  batch.labels.clear();
  for (std::size_t i = 0; i < batch_size; ++i) batch.labels.push_back(rng.below(dims.back()));

  std::vector<double> weights;
  if (index % 2 == 1) {
    for (std::size_t c = 0; c < dims.back(); ++c) weights.push_back(rng.uniform(0.5, 2.0));
  }

  Gradients analytic = backward(model, batch, weights);
  if (inject_fault) {
    double* worst = nullptr;
    for (auto& layer : analytic.layers) {
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
        double* p = layer.weight.data() + i;
        if (worst == nullptr || std::abs(*p) > std::abs(*worst)) worst = p;
      }
    }
    *worst *= 2.0;
  }
  const double error = grad_check(model, batch, weights, analytic);

  CheckResult r;
  r.name = "grad_check";
  r.seed = seed;
  r.value = error;
  r.threshold = 1e-4;
  r.passed = error < r.threshold;
  std::string shape;
  for (std::size_t d : dims) shape += (shape.empty() ? "" : "-") + std::to_string(d);
  r.detail = format("model %s (%zu params), batch %zu, %s", shape.c_str(), params, batch_size,
                    weights.empty() ? "unweighted" : "weighted");
  return r;
}

std::vector<CheckResult> loss_checks(std::uint64_t base) {
  std::vector<CheckResult> out;

  const std::uint64_t ce_seed = case_seed(base, 1000);
  Rng rng(ce_seed);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < kLossPairs; ++i) {
    const std::size_t classes = 2 + rng.below(7);
    Eigen::VectorXd logits(static_cast<Eigen::Index>(classes));
    for (auto& v : logits) v = rng.normal(0.0, 5.0);
    const ProbVector p = softmax(logits);
    const std::size_t y = rng.below(classes);
    const std::vector<double> ones(classes, 1.0);
    max_diff = std::max(max_diff, std::abs(weighted_cross_entropy(p, y, ones) - cross_entropy(p, y)));
  }
  out.push_back({"weighted_ce_all_ones", ce_seed, max_diff == 0.0, max_diff, 0.0,
                 format("%zu random (probs, class) pairs, exact equality", kLossPairs)});

  const std::uint64_t sm_seed = case_seed(base, 1001);
  Rng srng(sm_seed);
  double sum_err = 0.0;
  double shift_err = 0.0;
  bool finite = true;
  for (std::size_t i = 0; i < kLossPairs; ++i) {
    const std::size_t classes = 2 + srng.below(7);
    Eigen::VectorXd logits(static_cast<Eigen::Index>(classes));
    for (auto& v : logits) v = srng.uniform(-1000.0, 1000.0);
    const ProbVector p = softmax(logits);
    finite = finite && p.values().allFinite();
    sum_err = std::max(sum_err, std::abs(p.values().sum() - 1.0));
    const Eigen::VectorXd shifted = logits.array() + srng.uniform(-50.0, 50.0);
    shift_err = std::max(shift_err, (softmax(shifted).values() - p.values()).cwiseAbs().maxCoeff());
  }
  out.push_back({"softmax_sum", sm_seed, finite && sum_err <= 1e-9, sum_err, 1e-9,
                 "logits uniform in [-1000, 1000]"});
  out.push_back({"softmax_shift_invariance", sm_seed, shift_err <= 1e-9, shift_err, 1e-9,
                 "constant offsets in [-50, 50]"});
  return out;
}

struct OracleMetrics {
  double accuracy = 0.0;
  std::vector<double> precision, recall, f1;
  double macro_f1 = 0.0;
};

OracleMetrics tally_oracle(const std::vector<std::size_t>& truth,
                           const std::vector<std::size_t>& pred, std::size_t classes) {
  OracleMetrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == pred[i];
  m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == c && truth[i] == c) ++tp;
      if (pred[i] == c && truth[i] != c) ++fp;
      if (pred[i] != c && truth[i] == c) ++fn;
    }
    const double p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    m.precision.push_back(p);
    m.recall.push_back(r);
    m.f1.push_back(p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r));
    m.macro_f1 += m.f1.back() / static_cast<double>(classes);
  }
  return m;
}

std::optional<double> pairwise_auc(const std::vector<double>& scores, const std::vector<bool>& pos) {
  double credit = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!pos[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (pos[j]) continue;
      ++pairs;
      credit += scores[i] > scores[j] ? 1.0 : (scores[i] == scores[j] ? 0.5 : 0.0);
    }
  }
  if (pairs == 0) return std::nullopt;
  return credit / static_cast<double>(pairs);
}

std::vector<CheckResult> metric_checks(std::uint64_t base) {
  std::vector<CheckResult> out;
  const std::uint64_t seed = case_seed(base, 2000);
  Rng rng(seed);
  constexpr std::size_t kClasses = 4;
  double worst = 0.0;
  std::size_t auc_cases = 0;
  for (std::size_t k = 0; k < kMetricCases; ++k) {
    const std::size_t n = 1 + rng.below(50);
    std::vector<std::size_t> truth(n), pred(n);
    Eigen::MatrixXd probs(kClasses, static_cast<Eigen::Index>(n));
    const bool coarse = rng.below(2) == 0;  // coarse scores produce ties
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = rng.below(kClasses);
      double total = 0.0;
      for (std::size_t c = 0; c < kClasses; ++c) {
        double v = rng.uniform(0.01, 1.0);
        if (coarse) v = std::round(v * 4.0) / 4.0 + 0.25;
        probs(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = v;
        total += v;
      }
      probs.col(static_cast<Eigen::Index>(i)) /= total;
      pred[i] = rng.below(3) == 0 ? truth[i] : rng.below(kClasses);
    }
    const MetricsReport report = build_report(truth, pred, probs);
    const OracleMetrics oracle = tally_oracle(truth, pred, kClasses);
    worst = std::max(worst, std::abs(report.accuracy - oracle.accuracy));
    worst = std::max(worst, std::abs(report.macro_f1 - oracle.macro_f1));
    for (std::size_t c = 0; c < kClasses; ++c) {
      worst = std::max(worst, std::abs(report.per_class[c].precision - oracle.precision[c]));
      worst = std::max(worst, std::abs(report.per_class[c].recall - oracle.recall[c]));
      worst = std::max(worst, std::abs(report.per_class[c].f1 - oracle.f1[c]));
    }

    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < kClasses; ++c) {
      std::vector<double> scores(n);
      std::vector<bool> pos(n);
      for (std::size_t i = 0; i < n; ++i) {
        scores[i] = probs(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i));
        pos[i] = truth[i] == c;
      }
      if (const auto auc = pairwise_auc(scores, pos)) {
        sum += *auc;
        ++defined;
      }
    }
    std::size_t present = 0;
    for (std::size_t c = 0; c < kClasses; ++c) {
      present += std::count(truth.begin(), truth.end(), c) > 0;
    }
    if (present >= 2) {
      ++auc_cases;
      const double expected = sum / static_cast<double>(defined);
      worst = std::max(worst, report.macro_auc ? std::abs(*report.macro_auc - expected) : 1.0);
    } else if (report.macro_auc) {
      worst = 1.0;
    }
  }
  out.push_back({"metric_oracle", seed, worst <= 1e-9, worst, 1e-9,
                 format("%zu random instances (%zu with macro AUC), 4 classes, n <= 50",
                        kMetricCases, auc_cases)});

  const std::vector<double> scores{0.1, 0.4, 0.35, 0.8};
  const bool flags[] = {false, false, true, true};
  const auto auc = auc_binary(scores, std::span<const bool>(flags, 4));
  const double err = auc ? std::abs(*auc - 0.75) : 1.0;
  out.push_back({"auc_known_value", 0, err <= 1e-12, err, 1e-12,
                 "scores (0.1, 0.4, 0.35, 0.8), positives (N, N, Y, Y) -> 0.75"});
  return out;
}

TwoStageModel random_two_stage(Rng& rng) {
  TwoStageModel model;
  model.preprocess.target_dims = {1, 2, 3};
  model.preprocess.trim_low_frac = 0.0;
  model.preprocess.trim_high_frac = 0.0;
  const std::size_t in = model.preprocess.feature_length();
  model.gender_model = MlpModel::initialized({in, 5, kNumGenders}, rng);
  model.male_disease_model = MlpModel::initialized({in, 7, 5, kNumDiseases}, rng);
  model.female_disease_model = MlpModel::initialized({in, 7, 5, kNumDiseases}, rng);
  for (MlpModel* m : {&model.male_disease_model, &model.female_disease_model}) {
    for (auto& layer : m->layers()) {
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.uniform(-0.5, 0.5);
    }
  }
  return model;
}

// Makes the gender head output constant logits (female, male).
void force_gender(TwoStageModel& model, double female_logit, double male_logit) {
  auto& head = model.gender_model.layers().back();
  head.weight.setZero();
  head.bias << female_logit, male_logit;
}

std::vector<CheckResult> routing_checks(std::uint64_t base) {
  std::vector<CheckResult> out;
  const std::uint64_t seed = case_seed(base, 3000);
  Rng rng(seed);
  TwoStageModel model = random_two_stage(rng);
  const std::size_t in = model.preprocess.feature_length();

  std::vector<std::vector<double>> inputs(kRoutingSamples, std::vector<double>(in));
  std::vector<Gender> genders(kRoutingSamples);
  for (std::size_t i = 0; i < kRoutingSamples; ++i) {
    for (auto& v : inputs[i]) v = rng.normal();
    genders[i] = rng.below(2) == 0 ? Gender::kFemale : Gender::kMale;
  }
  const auto direct = [](const MlpModel& m, const std::vector<double>& x) {
    return softmax(forward(m, x).logits);
  };

  const auto forced = [&](double f, double m, Gender expected, const char* name) {
    TwoStageModel doctored = model;
    force_gender(doctored, f, m);
    const MlpModel& expert =
        expected == Gender::kMale ? model.male_disease_model : model.female_disease_model;
    std::size_t mismatches = 0;
    for (const auto& x : inputs) {
      const Prediction p = predict_features(doctored, x);
      if (p.routed_gender != expected || !(p.disease_probs == direct(expert, x))) ++mismatches;
    }
    out.push_back({name, seed, mismatches == 0, static_cast<double>(mismatches), 0.0,
                   format("%zu inputs, bit-identical disease probabilities required",
                          kRoutingSamples)});
  };
  forced(0.0, 8.0, Gender::kMale, "routing_forced_male");
  forced(8.0, 0.0, Gender::kFemale, "routing_forced_female");
  forced(0.0, 0.0, Gender::kFemale, "routing_tie_goes_female");

  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < kRoutingSamples; ++i) {
    const Prediction p = predict_features(model, inputs[i], genders[i]);
    const MlpModel& expert = genders[i] == Gender::kMale ? model.male_disease_model
                                                          : model.female_disease_model;
    const ProbVector expected = direct(expert, inputs[i]);
    if (!(p.disease_probs == expected) || p.disease != kAllDiseases[expected.argmax()]) {
      ++mismatches;
    }
  }
  out.push_back({"routing_true_gender_oracle", seed, mismatches == 0,
                 static_cast<double>(mismatches), 0.0,
                 format("%zu inputs routed by their true gender", kRoutingSamples)});
  return out;
}

std::vector<CheckResult> schedule_checks() {
  std::vector<CheckResult> out;
  const LrSchedule s = LrSchedule::standard(2760);
  const double boundary = std::abs(lr_at(s, s.warmup_steps) - 1e-4);
  const double end = std::abs(lr_at(s, s.total_steps) - s.min_lr);
  const double jump = std::abs(lr_at(s, s.warmup_steps) - lr_at(s, s.warmup_steps - 1));
  const double mid =
      std::abs(lr_at(s, s.warmup_steps + (s.total_steps - s.warmup_steps) / 2) -
               0.5 * (s.peak_lr + s.min_lr));
  out.push_back({"lr_warmup_boundary", 0, boundary <= 1e-12, boundary, 1e-12,
                 format("lr at step %zu equals the peak 1e-4", s.warmup_steps)});
  out.push_back({"lr_final_step", 0, end <= 1e-12, end, 1e-12, "lr at the last step equals min_lr"});
  out.push_back({"lr_continuity", 0, jump <= 1e-12, jump, 1e-12,
                 "warmup and cosine branches meet at the boundary"});
  out.push_back({"lr_cosine_midpoint", 0, mid <= 1e-12, mid, 1e-12,
                 "midpoint of the decay is (peak + min) / 2"});
  return out;
}

}  // namespace

std::vector<CheckResult> run_verification(const VerifyOptions& options) {
  std::vector<CheckResult> results;
  for (std::size_t i = 0; i < kGradCases; ++i) {
    results.push_back(grad_case(options.seed, i, options.inject_gradient_fault));
  }
  for (auto* group : {&loss_checks, &metric_checks, &routing_checks}) {
    for (auto& r : (*group)(options.seed)) results.push_back(std::move(r));
  }
  for (auto& r : schedule_checks()) results.push_back(std::move(r));
  return results;
}

}  // namespace twostage::cli
