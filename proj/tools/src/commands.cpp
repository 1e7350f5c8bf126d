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

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "twostage/binary_io.hpp"
#include "twostage/error.hpp"
#include "twostage/hash.hpp"
#include "twostage/json_io.hpp"
#include "twostage/pipeline.hpp"
#include "twostage/preprocess.hpp"
#include "twostage_cli/cli.hpp"
#include "twostage_cli/report.hpp"
#include "twostage_cli/run_config.hpp"
#include "twostage_cli/verify.hpp"

namespace twostage::cli {
namespace fs = std::filesystem;

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const InvalidInput*>(&error) || dynamic_cast<const ConfigError*>(&error) ||
      dynamic_cast<const FormatError*>(&error)) {
    return kExitValidation;
  }
  return kExitRuntime;
}

namespace {

struct Options {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::string format;
  std::string manifest;
  std::string split = "val";
  std::string routing = "predicted";
  std::string preprocess;
  std::vector<std::string> checkpoints;
  bool inject_gradient_fault = false;
};

// Flags merged over the --config document.
struct Context {
  RunConfig run;
  ReportFormat format = ReportFormat::kText;
  std::optional<fs::path> out;
  std::optional<fs::path> manifest;
};

Context resolve(const Options& opts) {
  Context ctx;
  if (!opts.config.empty()) ctx.run = load_run_config(opts.config);
  ctx.format = ctx.run.format.value_or(ReportFormat::kText);
  if (!opts.format.empty()) {
    const auto f = parse_report_format(opts.format);
    if (!f) throw ConfigError("--format must be text or json");
    ctx.format = *f;
  }
  ctx.out = opts.out.empty() ? ctx.run.out : std::optional<fs::path>(opts.out);
  ctx.manifest = opts.manifest.empty() ? ctx.run.manifest : std::optional<fs::path>(opts.manifest);
  return ctx;
}

fs::path require_out(const Context& ctx) {
  if (!ctx.out) throw ConfigError("an output directory is required: pass --out or set \"out\"");
  return *ctx.out;
}

fs::path require_manifest(const Context& ctx) {
  if (!ctx.manifest) throw ConfigError("a manifest is required: pass --manifest or set \"manifest\"");
  return *ctx.manifest;
}

Split parse_split_option(const std::string& s) {
  const auto split = parse_split(s);
  if (!split) throw ConfigError("--split must be train or val");
  return *split;
}

std::string file_sha256(const fs::path& path) { return sha256_hex(binary::read_file(path)); }

void emit(std::ostream& out, ReportFormat format, const Json& json, const std::string& text) {
  if (format == ReportFormat::kJson) {
    out << json.dump(2) << "\n";
  } else {
    out << text;
  }
}

// ---------------------------------------------------------------- synth

int cmd_synth(const Options& opts, std::ostream& out) {
  const Context ctx = resolve(opts);
  CohortSpec spec = ctx.run.cohort.value_or(CohortSpec{});
  spec.seed = resolve_cohort_seed(ctx.run, opts.seed);
  spec.validate();
  const fs::path dir = require_out(ctx);

  const Dataset dataset = generate_synthetic(spec);
  const fs::path manifest = write_dataset(dataset, dir);
  binary::write_file(dir / "cohort.json", to_json(spec).dump(2) + "\n");
  const auto counts = tally_counts(dataset);
  const std::string digest = file_sha256(manifest);
  const std::string data_digest = dataset_sha256(dataset);

  Json j;
  j["command"] = "synth";
  j["cohort"] = to_json(spec);
  j["counts"] = counts_to_json(counts);
  j["manifest_sha256"] = digest;
  j["dataset_sha256"] = data_digest;
  std::ostringstream text;
  text << counts_table(counts) << "manifest: " << manifest.string() << "\n"
       << "manifest sha256: " << digest << "\n"
       << "dataset sha256:  " << data_digest << "\n";
  emit(out, ctx.format, j, text.str());
  return kExitOk;
}

// ----------------------------------------------------------- preprocess

int cmd_preprocess(const Options& opts, std::ostream& out) {
  const Context ctx = resolve(opts);
  PreprocessConfig config = ctx.run.train.preprocess;
  if (!opts.preprocess.empty()) {
    config = preprocess_config_from_json(
        parse_json(binary::read_file(opts.preprocess), opts.preprocess));
  }
  config.validate();
  const fs::path manifest = require_manifest(ctx);
  const fs::path dir = require_out(ctx);
  const Dataset dataset = load_manifest(manifest);

  std::vector<Sample> processed;
  std::size_t degenerate = 0;
  for (const auto& s : dataset.samples()) {
    const Volume trimmed = trim_slices(s.volume, config.trim_low_frac, config.trim_high_frac);
    NormalizeResult n = normalize(resize(trimmed, config.target_dims), config.normalization);
    degenerate += n.degenerate;
    processed.push_back({s.id, std::move(n.volume), s.gender, s.disease, s.split});
  }
  const fs::path written = write_dataset(Dataset(std::move(processed)), dir);
  binary::write_file(dir / "preprocess.json", to_json(config).dump(2) + "\n");

  Json j;
  j["command"] = "preprocess";
  j["preprocess"] = to_json(config);
  j["input_manifest_sha256"] = file_sha256(manifest);
  j["manifest_sha256"] = file_sha256(written);
  j["samples"] = dataset.size();
  j["degenerate_volumes"] = degenerate;
  std::ostringstream text;
  text << "preprocessed " << dataset.size() << " volumes to " << config.target_dims.depth << "x"
       << config.target_dims.height << "x" << config.target_dims.width << " ("
       << to_string(config.normalization) << ")\n";
  if (degenerate > 0) text << degenerate << " volume(s) had zero spread and were zeroed\n";
  text << "manifest: " << written.string() << "\n";
  emit(out, ctx.format, j, text.str());
  return kExitOk;
}

// ---------------------------------------------------------------- train

Json model_summary(const TrainResult& r) {
  const auto& best = r.history.at(r.best_epoch - 1);
  return {{"train_count", r.train_count},
          {"best_epoch", r.best_epoch},
          {"val_macro_f1", best.val_macro_f1},
          {"val_accuracy", best.val_accuracy},
          {"warmup_steps", r.schedule.warmup_steps},
          {"total_steps", r.schedule.total_steps},
          {"lr_at_warmup_end", lr_at(r.schedule, r.schedule.warmup_steps)}};
}

std::string summary_table(const std::vector<std::pair<std::string, const TrainResult*>>& rows) {
  std::ostringstream text;
  text << "model    | train | best epoch | val macro-F1 | val accuracy\n";
  text << "---------+-------+------------+--------------+-------------\n";
  for (const auto& [name, r] : rows) {
    const auto& best = r->history.at(r->best_epoch - 1);
    char line[160];
    std::snprintf(line, sizeof line, "%-8s | %5zu | %10zu | %12.4f | %12.4f\n", name.c_str(),
                  r->train_count, r->best_epoch, best.val_macro_f1, best.val_accuracy);
    text << line;
  }
  const TrainResult& first = *rows.front().second;
  char line[160];
  std::snprintf(line, sizeof line, "lr at warmup end (step %zu of %zu): %.6e\n",
                first.schedule.warmup_steps, first.schedule.total_steps,
                lr_at(first.schedule, first.schedule.warmup_steps));
  text << line;
  return text.str();
}

int cmd_train(const Options& opts, std::ostream& out, bool baseline) {
  const Context ctx = resolve(opts);
  TrainConfig config = ctx.run.train;
  config.seed = resolve_train_seed(ctx.run, opts.seed);
  config.validate();
  const fs::path manifest = require_manifest(ctx);
  const fs::path dir = require_out(ctx);
  const Dataset dataset = load_manifest(manifest);
  const std::string digest = file_sha256(manifest);
  const std::string data_digest = dataset_sha256(dataset);
  const Json provenance = {
      {"manifest_sha256", digest}, {"dataset_sha256", data_digest}, {"samples", dataset.size()}};

  Json j;
  j["command"] = baseline ? "train-baseline" : "train";
  j["config"] = to_json(config);
  j["manifest_sha256"] = digest;
  j["dataset_sha256"] = data_digest;
  std::ostringstream text;
  text << (baseline ? "baseline" : "two-stage") << " training on " << dataset.size()
       << " samples (" << dataset.count(Split::kTrain) << " train / "
       << dataset.count(Split::kVal) << " val), seed " << config.seed << ", " << config.epochs
       << " epochs\n\n";
  if (baseline) {
    const BaselineTraining t = train_baseline(dataset, config);
    save_checkpoint(t, config, dir, provenance);
    j["kind"] = "baseline";
    j["models"] = {{"baseline", model_summary(t.disease)}};
    text << summary_table({{"baseline", &t.disease}});
  } else {
    const TwoStageTraining t = train_two_stage(dataset, config);
    save_checkpoint(t, config, dir, provenance);
    j["kind"] = "two_stage";
    j["models"] = {{"gender", model_summary(t.gender)},
                   {"male", model_summary(t.male)},
                   {"female", model_summary(t.female)}};
    text << summary_table({{"gender", &t.gender}, {"male", &t.male}, {"female", &t.female}});
  }
  text << "checkpoint: " << dir.string() << "\n";
  emit(out, ctx.format, j, text.str());
  return kExitOk;
}

// ------------------------------------------------------- eval / compare

Evaluation evaluate_checkpoint(const fs::path& dir, const Dataset& dataset, Split split,
                               Routing routing) {
  const auto meta = parse_json(binary::read_file(dir / "metadata.json"),
                               (dir / "metadata.json").string());
  Evaluation e;
  e.checkpoint_config = meta.value("config", Json::object());
  e.checkpoint_config_hash = meta.value("config_hash", "");
  if (checkpoint_kind(dir) == CheckpointKind::kTwoStage) {
    e.kind = "two_stage";
    e.method = routing == Routing::kTrueGender ? "Gender-aware (true-gender routing)"
                                               : "Gender-aware";
    e.routing = routing == Routing::kTrueGender ? "true_gender" : "predicted_gender";
    e.metrics = evaluate(load_two_stage(dir), dataset, split, routing);
  } else {
    e.kind = "baseline";
    e.method = "Baseline";
    e.routing = "none";
    e.metrics = evaluate(load_baseline(dir), dataset, split);
  }
  return e;
}

Routing parse_routing(const std::string& s) {
  if (s == "predicted") return Routing::kPredictedGender;
  if (s == "true") return Routing::kTrueGender;
  throw ConfigError("--routing must be predicted or true");
}

int cmd_eval(const Options& opts, std::ostream& out) {
  const Context ctx = resolve(opts);
  if (opts.checkpoints.size() != 1) throw ConfigError("eval takes exactly one --checkpoint");
  const Split split = parse_split_option(opts.split);
  const fs::path manifest = require_manifest(ctx);
  const Dataset dataset = load_manifest(manifest);
  const EvaluationContext ectx{std::string(to_string(split)), file_sha256(manifest),
                               dataset_sha256(dataset)};
  const Evaluation e = evaluate_checkpoint(opts.checkpoints.front(), dataset, split,
                                           parse_routing(opts.routing));
  const Json j = eval_report(e, ectx);
  const std::string text = eval_report_text(e, ectx);
  if (ctx.out) {
    fs::create_directories(*ctx.out);
    binary::write_file(*ctx.out / "report.json", j.dump(2) + "\n");
    binary::write_file(*ctx.out / "report.txt", text);
  }
  emit(out, ctx.format, j, text);
  return kExitOk;
}

int cmd_compare(const Options& opts, std::ostream& out) {
  const Context ctx = resolve(opts);
  if (opts.checkpoints.size() != 2) throw ConfigError("compare takes exactly two checkpoints");
  const Split split = parse_split_option(opts.split);
  const fs::path manifest = require_manifest(ctx);
  const Dataset dataset = load_manifest(manifest);
  const EvaluationContext ectx{std::string(to_string(split)), file_sha256(manifest),
                               dataset_sha256(dataset)};
  std::vector<Evaluation> rows;
  for (const auto& dir : opts.checkpoints) {
    rows.push_back(evaluate_checkpoint(dir, dataset, split, Routing::kPredictedGender));
  }
  const Json j = compare_report(rows, ectx);
  const std::string text = compare_report_text(rows, ectx);
  if (ctx.out) {
    fs::create_directories(*ctx.out);
    binary::write_file(*ctx.out / "compare.json", j.dump(2) + "\n");
    binary::write_file(*ctx.out / "compare.txt", text);
  }
  emit(out, ctx.format, j, text);
  return kExitOk;
}

// --------------------------------------------------------------- verify

int cmd_verify(const Options& opts, std::ostream& out) {
  const Context ctx = resolve(opts);
  VerifyOptions vo;
  vo.seed = opts.seed.value_or(ctx.run.seed.value_or(0));
  vo.inject_gradient_fault = opts.inject_gradient_fault;
  const auto results = run_verification(vo);

  std::size_t passed = 0;
  Json checks = Json::array();
  std::ostringstream text;
  for (const auto& r : results) {
    passed += r.passed;
    checks.push_back({{"name", r.name},
                      {"seed", r.seed},
                      {"passed", r.passed},
                      {"value", r.value},
                      {"threshold", r.threshold},
                      {"detail", r.detail}});
    char line[384];
    std::snprintf(line, sizeof line, "%s %-26s seed=%-20llu value=%.3e limit=%.1e  %s\n",
                  r.passed ? "PASS" : "FAIL", r.name.c_str(),
                  static_cast<unsigned long long>(r.seed), r.value, r.threshold,
                  r.detail.c_str());
    text << line;
  }
  text << passed << "/" << results.size() << " checks passed (base seed " << vo.seed << ")\n";
  Json j = {{"command", "verify"},
            {"base_seed", vo.seed},
            {"passed", passed == results.size()},
            {"checks", checks}};
  emit(out, ctx.format, j, text.str());
  return passed == results.size() ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opts;
  CLI::App app{"Two-stage gender-routed disease classification on volumetric data", "twostage"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", opts.seed, "Run seed (overrides the config)");
  app.add_option("--config", opts.config, "Run config JSON")->check(CLI::ExistingFile);
  app.add_option("--out", opts.out, "Output directory");
  app.add_option("--format", opts.format, "Report format: text or json");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort and its manifest");
  auto* preprocess = app.add_subcommand("preprocess", "Trim, resize and normalize a dataset");
  preprocess->add_option("--manifest", opts.manifest, "Input manifest");
  preprocess->add_option("--preprocess", opts.preprocess, "Preprocess config JSON")
      ->check(CLI::ExistingFile);
  auto* train = app.add_subcommand("train", "Train the two-stage model");
  auto* train_baseline = app.add_subcommand("train-baseline", "Train the single-classifier baseline");
  for (auto* sub : {train, train_baseline}) {
    sub->add_option("--manifest", opts.manifest, "Dataset manifest");
  }
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  eval->add_option("--checkpoint", opts.checkpoints, "Checkpoint directory")->required();
  eval->add_option("--routing", opts.routing, "Two-stage routing: predicted or true");
  auto* compare = app.add_subcommand("compare", "Compare two checkpoints side by side");
  compare->add_option("--checkpoint", opts.checkpoints, "Checkpoint directory (give two)")
      ->required();
  for (auto* sub : {eval, compare}) {
    sub->add_option("--manifest", opts.manifest, "Dataset manifest");
    sub->add_option("--split", opts.split, "train or val (default val)");
  }
  auto* verify = app.add_subcommand("verify", "Run gradient, metric and routing self-checks");
  verify->add_flag("--inject-grad-fault", opts.inject_gradient_fault)->group("");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream cli_out;
    std::ostringstream cli_err;
    const int code = app.exit(e, cli_out, cli_err);
    out << cli_out.str();
    err << cli_err.str();
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (synth->parsed()) return cmd_synth(opts, out);
    if (preprocess->parsed()) return cmd_preprocess(opts, out);
    if (train->parsed()) return cmd_train(opts, out, false);
    if (train_baseline->parsed()) return cmd_train(opts, out, true);
    if (eval->parsed()) return cmd_eval(opts, out);
    if (compare->parsed()) return cmd_compare(opts, out);
    if (verify->parsed()) return cmd_verify(opts, out);
  } catch (const std::exception& e) {
    err << "twostage: error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitValidation;
}

}  // namespace twostage::cli
