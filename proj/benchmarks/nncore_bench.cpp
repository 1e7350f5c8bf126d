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

#include <benchmark/benchmark.h>

#include <vector>

#include "twostage/nncore.hpp"
#include "twostage/random.hpp"

namespace twostage {
namespace {

constexpr std::size_t kBatch = 8;

// Arguments: input width, hidden widths fixed at 256 and 64.
std::vector<std::size_t> dims_for(std::int64_t input) {
  return {static_cast<std::size_t>(input), 256, 64, 4};
}

Batch random_batch(std::size_t input, Rng& rng) {
  Batch batch;
  batch.inputs.resize(static_cast<Eigen::Index>(input), kBatch);
  for (Eigen::Index c = 0; c < batch.inputs.cols(); ++c) {
    for (Eigen::Index r = 0; r < batch.inputs.rows(); ++r) batch.inputs(r, c) = rng.normal();
  }
  for (std::size_t i = 0; i < kBatch; ++i) batch.labels.push_back(rng.below(4));
  return batch;
}

void BM_ForwardLogits(benchmark::State& state) {
  Rng rng(1);
  const auto model = MlpModel::initialized(dims_for(state.range(0)), rng);
  const Batch batch = random_batch(model.input_dim(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(forward_logits(model, batch.inputs));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kBatch));
}
BENCHMARK(BM_ForwardLogits)->Arg(1024)->Arg(8192);

void BM_Backward(benchmark::State& state) {
  Rng rng(2);
  const auto model = MlpModel::initialized(dims_for(state.range(0)), rng);
  const Batch batch = random_batch(model.input_dim(), rng);
  const std::vector<double> weights{0.8, 1.3, 1.0, 1.0};
  Gradients grads;
  for (auto _ : state) {
    backward(model, batch, weights, grads);
    benchmark::DoNotOptimize(grads.loss);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kBatch));
}
BENCHMARK(BM_Backward)->Arg(1024)->Arg(8192);

void BM_BackwardThenAdam(benchmark::State& state) {
  Rng rng(3);
  auto model = MlpModel::initialized(dims_for(state.range(0)), rng);
  const Batch batch = random_batch(model.input_dim(), rng);
  const std::vector<double> weights{0.8, 1.3, 1.0, 1.0};
  auto adam = AdamState::for_model(model);
  Gradients grads;
  for (auto _ : state) {
    backward(model, batch, weights, grads);
    adam_step(model, grads, adam, 1e-6);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kBatch));
}
BENCHMARK(BM_BackwardThenAdam)->Arg(1024)->Arg(8192);

void BM_TrainStep(benchmark::State& state) {
  Rng rng(3);
  auto model = MlpModel::initialized(dims_for(state.range(0)), rng);
  const Batch batch = random_batch(model.input_dim(), rng);
  const std::vector<double> weights{0.8, 1.3, 1.0, 1.0};
  auto adam = AdamState::for_model(model);
  Gradients scratch;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(model, batch, weights, adam, 1e-6, scratch));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kBatch));
}
BENCHMARK(BM_TrainStep)->Arg(1024)->Arg(8192);

void BM_LrSchedule(benchmark::State& state) {
  const auto schedule = LrSchedule::standard(9200);
  std::size_t step = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lr_at(schedule, step));
    step = (step + 1) % 9200;
  }
}
BENCHMARK(BM_LrSchedule);

}  // namespace
}  // namespace twostage
