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

#include "twostage/preprocess.hpp"
#include "twostage/random.hpp"

namespace twostage {
namespace {

Volume noise_volume(VolumeDims dims) {
  Rng rng(11);
  std::vector<float> voxels(dims.voxel_count());
  for (auto& v : voxels) v = static_cast<float>(rng.normal());
  return Volume(dims, std::move(voxels));
}

void BM_Resize(benchmark::State& state) {
  const Volume volume = noise_volume({16, 64, 64});
  const auto side = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(resize(volume, {8, side, side}));
}
BENCHMARK(BM_Resize)->Arg(16)->Arg(32)->Arg(64);

void BM_Featurize(benchmark::State& state) {
  const Volume volume = noise_volume({16, 64, 64});
  PreprocessConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(featurize(volume, config));
}
BENCHMARK(BM_Featurize);

}  // namespace
}  // namespace twostage
