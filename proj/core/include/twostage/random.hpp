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

#ifndef TWOSTAGE_RANDOM_HPP_
#define TWOSTAGE_RANDOM_HPP_

#include <cstdint>
#include <random>

namespace twostage {

// Named stream identifiers. Every consumer of randomness derives its engine
// from (run seed, stream, index) so that results do not depend on the order in
// which independent pieces of work are executed.
enum class Stream : std::uint64_t {
  kCohortSample = 1,
  kInitGender = 2,
  kInitMale = 3,
  kInitFemale = 4,
  kInitBaseline = 5,
  kBatchOrder = 6,
  kVerify = 7,
};

// SplitMix64 finalizer chained over the three words.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t index) noexcept;

// Thin wrapper over std::mt19937_64. The engine's output sequence is fixed by
// the standard; the distributions below are written out here because the
// standard library's distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0)
      : engine_(mix_seed(seed, static_cast<std::uint64_t>(stream), index)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via the Box-Muller transform; the second variate of each
  // pair is cached.
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace twostage

#endif  // TWOSTAGE_RANDOM_HPP_
