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

// Acceptance runner. Prints one PASS or FAIL line per criterion and exits
// nonzero when any selected criterion fails. Pass criterion numbers (1-9) as
// arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "test_support.hpp"
#include "twostage/data.hpp"
#include "twostage/metrics.hpp"
#include "twostage/nncore.hpp"
#include "twostage/pipeline.hpp"
#include "twostage/preprocess.hpp"
#include "twostage_cli/cli.hpp"

namespace twostage::acceptance {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int run_quiet(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o;
  std::ostringstream e;
  const int code = cli::run_cli(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::fprintf(stderr, "command failed (%d): %s\n", code, e.str().c_str());
  return code;
}

// ------------------------------------------------------------------ 1

// Smallest |pre-activation| over every hidden unit and sample.
double hidden_margin(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  Eigen::MatrixXd a = inputs;
  double margin = std::numeric_limits<double>::infinity();
  const auto& layers = model.layers();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    Eigen::MatrixXd z = (layers[l].weight * a).colwise() + layers[l].bias;
    margin = std::min(margin, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return margin;
}

Outcome gradient_correctness() {
  const auto start = Clock::now();
  Rng rng(20260101);
  double worst = 0.0;
  std::size_t max_params = 0;
  for (int m = 0; m < 20; ++m) {
    std::vector<std::size_t> dims;
    do {
      dims = {2 + rng.below(23)};
      const std::size_t hidden = 1 + rng.below(2);
      for (std::size_t h = 0; h < hidden; ++h) dims.push_back(2 + rng.below(31));
      dims.push_back(2 + rng.below(4));
    } while (MlpModel(dims).parameter_count() > 2000);
    const auto model = testing::random_model(dims, rng, 0.6);
    max_params = std::max(max_params, model.parameter_count());

    const auto batch_size = static_cast<Eigen::Index>(1 + rng.below(8));
    Batch batch;
    do {
      batch.inputs = testing::random_matrix(static_cast<Eigen::Index>(dims.front()), batch_size, rng);
    } while (hidden_margin(model, batch.inputs) < 1e-3);
    for (Eigen::Index i = 0; i < batch_size; ++i) batch.labels.push_back(rng.below(dims.back()));
    std::vector<double> weights;
    if (m % 2 == 1) {
      for (std::size_t c = 0; c < dims.back(); ++c) weights.push_back(rng.uniform(0.2, 3.0));
    }
    worst = std::max(worst, grad_check(model, batch, weights));
  }
  const double elapsed = seconds_since(start);
  return {worst < 1e-4 && elapsed < 30.0,
          fmt("max relative error %.2e (< 1e-4) over 20 models up to %zu parameters, %.1f s (< 30 s)",
              worst, max_params, elapsed)};
}

// ------------------------------------------------------------------ 2

Outcome loss_identities() {
  Rng rng(2);
  std::size_t mismatches = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(7));
    Eigen::VectorXd logits(n);
    for (Eigen::Index i = 0; i < n; ++i) logits[i] = rng.uniform(-10.0, 10.0);
    const auto p = softmax(logits);
    const auto y = rng.below(static_cast<std::uint64_t>(n));
    const std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
    if (weighted_cross_entropy(p, y, ones) != cross_entropy(p, y)) ++mismatches;
  }
  double worst_sum = 0.0;
  bool finite = true;
  for (int k = 0; k < 1000; ++k) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(7));
    Eigen::VectorXd logits(n);
    for (Eigen::Index i = 0; i < n; ++i) logits[i] = rng.uniform(-1e3, 1e3);
    if (k % 10 == 0) logits[0] = 1e3;
    if (k % 10 == 1) logits[0] = -1e3;
    const auto p = softmax(logits);
    finite = finite && p.values().allFinite();
    worst_sum = std::max(worst_sum, std::abs(p.values().sum() - 1.0));
  }
  return {mismatches == 0 && finite && worst_sum <= 1e-9,
          fmt("%zu/1000 weighted-vs-plain mismatches, softmax max |sum - 1| = %.1e with logits "
              "up to 1e3, all finite: %s",
              mismatches, worst_sum, finite ? "yes" : "no")};
}

// ------------------------------------------------------------------ 3

Outcome metric_oracle() {
  Rng rng(3);
  constexpr std::size_t kC = 4;
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<std::size_t> truth(n), pred(n);
    Eigen::MatrixXd probs(4, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = rng.below(kC);
      pred[i] = rng.below(kC);
      for (Eigen::Index c = 0; c < 4; ++c) {
        probs(c, static_cast<Eigen::Index>(i)) =
            k % 2 ? rng.uniform(0.01, 1.0) : 1.0 + static_cast<double>(rng.below(3));
      }
      probs.col(static_cast<Eigen::Index>(i)) /= probs.col(static_cast<Eigen::Index>(i)).sum();
    }
    truth[0] = 0;
    truth[1] = 3;
    const auto report = build_report(truth, pred, probs);

    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += truth[i] == pred[i];
    worst = std::max(worst, std::abs(report.accuracy - static_cast<double>(correct) / n));
    double f1_sum = 0.0;
    double auc_sum = 0.0;
    std::size_t auc_defined = 0;
    for (std::size_t c = 0; c < kC; ++c) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += truth[i] == c && pred[i] == c;
        fp += truth[i] != c && pred[i] == c;
        fn += truth[i] == c && pred[i] != c;
      }
      const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
      const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
      const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
      f1_sum += f1;
      worst = std::max({worst, std::abs(report.per_class[c].precision - prec),
                        std::abs(report.per_class[c].recall - rec),
                        std::abs(report.per_class[c].f1 - f1)});
      double wins = 0.0;
      double pairs = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (truth[i] != c || truth[j] == c) continue;
          const double si = probs(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i));
          const double sj = probs(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j));
          pairs += 1;
          wins += si > sj ? 1.0 : si == sj ? 0.5 : 0.0;
        }
      }
      if (pairs > 0) {
        auc_sum += wins / pairs;
        ++auc_defined;
      }
    }
    worst = std::max({worst, std::abs(report.macro_f1 - f1_sum / kC),
                      std::abs(*report.macro_auc - auc_sum / static_cast<double>(auc_defined))});
  }
  const testing::Flags positives{false, false, true, true};
  const double known = *auc_binary(std::vector<double>{0.1, 0.4, 0.35, 0.8}, positives);
  return {worst <= 1e-9 && known == 0.75,
          fmt("max deviation from brute-force oracles %.1e (<= 1e-9) over 200 instances; "
              "known-value AUC %.4f",
              worst, known)};
}

// ------------------------------------------------------------------ 4

Outcome routing_identities() {
  Rng rng(4);
  CohortSpec spec;
  spec.seed = 4;
  spec.dims = {8, 16, 16};
  const Dataset val = generate_synthetic(spec).subset(Split::kVal);

  TwoStageModel model;
  model.preprocess.target_dims = {4, 8, 8};
  const std::size_t width = model.preprocess.feature_length();
  model.gender_model = testing::random_model({width, 16, 2}, rng, 0.1);
  model.male_disease_model = testing::random_model({width, 16, 4}, rng, 0.1);
  model.female_disease_model = testing::random_model({width, 16, 4}, rng, 0.1);

  std::size_t forced_mismatch = 0;
  std::size_t oracle_mismatch = 0;
  auto& head = model.gender_model.layers().back();
  const DenseLayer original = head;
  for (const auto& s : val.samples()) {
    const auto x = featurize(s.volume, model.preprocess);
    const auto direct_m = softmax(forward(model.male_disease_model, x).logits);
    const auto direct_f = softmax(forward(model.female_disease_model, x).logits);

    head.weight.setZero();
    head.bias = Eigen::Vector2d(-100.0, 100.0);
    auto p = predict_two_stage(model, s.volume);
    forced_mismatch += !(p.routed_gender == Gender::kMale && p.disease_probs == direct_m);
    head.bias = Eigen::Vector2d(100.0, -100.0);
    p = predict_two_stage(model, s.volume);
    forced_mismatch += !(p.routed_gender == Gender::kFemale && p.disease_probs == direct_f);
    head = original;

    p = predict_features(model, x, s.gender);
    const auto& expected = s.gender == Gender::kMale ? direct_m : direct_f;
    oracle_mismatch += !(p.disease_probs == expected &&
                         p.disease == kAllDiseases[expected.argmax()]);
  }
  return {val.size() == 155 && forced_mismatch == 0 && oracle_mismatch == 0,
          fmt("%zu forced-branch and %zu true-gender-oracle mismatches over %zu val samples",
              forced_mismatch, oracle_mismatch, val.size())};
}

// ------------------------------------------------------------------ 5

Outcome cohort_fidelity(const fs::path& work) {
  std::string out;
  if (run_quiet({"--seed", "0", "--format", "json", "synth", "--out", (work / "c5").string()},
                &out) != 0) {
    return {false, "synth command failed"};
  }
  const auto doc = nlohmann::json::parse(out);
  const auto& cells = doc["counts"]["cells"];
  const std::size_t expected[4][4] = {
      {125, 125, 25, 25}, {5, 79, 13, 12}, {100, 100, 20, 20}, {100, 100, 20, 20}};
  std::size_t wrong = 0;
  for (std::size_t d = 0; d < 4; ++d) {
    const auto& c = cells[std::string(to_string(kAllDiseases[d]))];
    const std::size_t got[4] = {c["train"]["F"], c["train"]["M"], c["val"]["F"], c["val"]["M"]};
    for (int k = 0; k < 4; ++k) wrong += got[k] != expected[d][k];
  }
  const Dataset data = load_manifest(work / "c5" / "manifest.jsonl");
  const auto parts = split_by_gender(data.subset(Split::kTrain));
  const std::size_t train = data.count(Split::kTrain);
  const std::size_t val = data.count(Split::kVal);
  return {wrong == 0 && train == 734 && val == 155 && parts.male.size() == 404 &&
              parts.female.size() == 330,
          fmt("%zu cell mismatches; %zu train / %zu val; %zu male / %zu female training samples",
              wrong, train, val, parts.male.size(), parts.female.size())};
}

// ------------------------------------------------------------------ 6

Outcome lr_schedule() {
  // Paper profile on the reference cohort: ceil(734 / 8) = 92 steps per epoch.
  const TrainConfig config = TrainConfig::paper_profile();
  const auto s = config.schedule.resolve(92 * config.epochs);
  const double at_boundary = lr_at(s, s.warmup_steps);
  const double at_end = lr_at(s, s.total_steps);
  const double jump = std::abs(lr_at(s, s.warmup_steps) - lr_at(s, s.warmup_steps - 1));
  return {std::abs(at_boundary - 1e-4) <= 1e-12 && std::abs(at_end - s.min_lr) <= 1e-12 &&
              jump <= 1e-12,
          fmt("lr(%zu) = %.6e, lr(%zu) = %.6e (min %.1e), boundary jump %.1e over %zu steps",
              s.warmup_steps, at_boundary, s.total_steps, at_end, s.min_lr, jump,
              s.total_steps)};
}

// ------------------------------------------------------------------ 7

Outcome trainability() {
  const auto start = Clock::now();
  CohortSpec spec;
  spec.seed = 7;
  spec.noise_sigma = 0.05;
  const Dataset data = generate_synthetic(spec);
  TrainConfig config = TrainConfig::desk_profile();
  config.seed = 7;
  const auto trained = train_two_stage(data, config);
  const auto report = evaluate(trained.model, data, Split::kVal);
  const double elapsed = seconds_since(start);
  const double gender_acc = report.gender_accuracy.value_or(0.0);
  return {gender_acc >= 0.95 && report.macro_f1 >= 0.90 && elapsed < 120.0,
          fmt("gender val accuracy %.4f (>= 0.95), disease macro-F1 %.4f (>= 0.90), "
              "%.1f s wall (< 120 s)",
              gender_acc, report.macro_f1, elapsed)};
}

// ------------------------------------------------------------------ 8

Outcome directional_claim() {
  TrainConfig config = TrainConfig::desk_profile();
  config.preprocess.target_dims = {4, 16, 16};
  config.hidden_dims = {64, 32};
  constexpr std::size_t kSquamous = 1;
  int wins = 0;
  double squamous_two_stage = 0.0;
  double squamous_baseline = 0.0;
  std::ostringstream runs;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CohortSpec spec;
    spec.seed = seed;
    const Dataset data = generate_synthetic(spec);
    config.seed = seed;
    const auto two = evaluate(train_two_stage(data, config).model, data, Split::kVal);
    const auto base = evaluate(train_baseline(data, config).model, data, Split::kVal);
    wins += two.macro_f1 >= base.macro_f1;
    squamous_two_stage += two.per_class[kSquamous].f1 / 10.0;
    squamous_baseline += base.per_class[kSquamous].f1 / 10.0;
    runs << fmt(" %llu:%.3f/%.3f", static_cast<unsigned long long>(seed), two.macro_f1,
                base.macro_f1);
  }
  return {wins >= 7 && squamous_two_stage > squamous_baseline,
          fmt("gender-aware macro-F1 >= baseline in %d/10 seeds (need 7); mean squamous F1 "
              "%.4f vs %.4f; seed:two-stage/baseline",
              wins, squamous_two_stage, squamous_baseline) +
              runs.str()};
}

// ------------------------------------------------------------------ 9

// Runs every command once into dir and records what it printed.
bool run_all_commands(const fs::path& config, const fs::path& dir,
                      std::vector<std::string>& printed) {
  const std::string d = dir.string();
  const std::string c = config.string();
  const std::vector<std::vector<std::string>> commands = {
      {"--config", c, "synth", "--out", d + "/data"},
      {"--config", c, "preprocess", "--manifest", d + "/data/manifest.jsonl", "--out",
       d + "/pre"},
      {"--config", c, "train", "--manifest", d + "/data/manifest.jsonl", "--out", d + "/ts"},
      {"--config", c, "train-baseline", "--manifest", d + "/data/manifest.jsonl", "--out",
       d + "/bl"},
      {"--format", "json", "eval", "--checkpoint", d + "/ts", "--manifest",
       d + "/data/manifest.jsonl", "--out", d + "/ev"},
      {"compare", "--checkpoint", d + "/ts", "--checkpoint", d + "/bl", "--manifest",
       d + "/data/manifest.jsonl", "--out", d + "/cmp"},
      {"--seed", "9", "verify"},
  };
  for (const auto& args : commands) {
    std::string out;
    if (run_quiet(args, &out) != 0) return false;
    // Paths differ between the two runs; everything else must not.
    for (std::size_t pos; (pos = out.find(d)) != std::string::npos;) out.replace(pos, d.size(), "<dir>");
    printed.push_back(out);
  }
  return true;
}

Outcome determinism(const fs::path& work) {
  const fs::path config = fs::path(TWOSTAGE_SOURCE_DIR) / "configs" / "run_smoke.json";
  std::vector<std::string> first_out;
  std::vector<std::string> second_out;
  if (!run_all_commands(config, work / "c9a", first_out) ||
      !run_all_commands(config, work / "c9b", second_out)) {
    return {false, "a command failed"};
  }
  const auto a = testing::directory_snapshot(work / "c9a");
  const auto b = testing::directory_snapshot(work / "c9b");
  std::size_t differing = 0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) differing += a[i] != b[i];
  const bool same_stdout = first_out == second_out;
  return {a.size() == b.size() && differing == 0 && same_stdout,
          fmt("%zu files compared, %zu differ; stdout of 7 commands identical: %s", a.size(),
              differing, same_stdout ? "yes" : "no")};
}

}  // namespace
}  // namespace twostage::acceptance

int main(int argc, char** argv) {
  using namespace twostage::acceptance;
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  twostage::testing::TempDir work("acceptance");
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"loss identities", loss_identities},
      {"metric oracle equivalence", metric_oracle},
      {"routing identities", routing_identities},
      {"reference cohort counts", [&] { return cohort_fidelity(work.path()); }},
      {"learning-rate schedule", lr_schedule},
      {"end-to-end trainability", trainability},
      {"minority-class direction", directional_claim},
      {"determinism", [&] { return determinism(work.path()); }},
  };

  int failures = 0;
  for (int k : selected) {
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion %d\n", k);
      return 2;
    }
    const auto& [name, check] = criteria[static_cast<std::size_t>(k - 1)];
    Outcome outcome{false, ""};
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    failures += !outcome.passed;
    std::printf("%s criterion %d (%s): %s\n", outcome.passed ? "PASS" : "FAIL", k, name,
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
