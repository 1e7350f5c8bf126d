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

// Self-checks run by `twostage verify`: finite-difference gradient checks,
// loss and softmax identities, metric brute-force oracles, routing identities
// and the learning-rate schedule. Every case draws from its own seed, printed
// with the result so a failure can be replayed in isolation.

#ifndef TWOSTAGE_CLI_VERIFY_HPP_
#define TWOSTAGE_CLI_VERIFY_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace twostage::cli {

struct CheckResult {
  std::string name;
  std::uint64_t seed = 0;
  bool passed = false;
  double value = 0.0;      // measured error or discrepancy
  double threshold = 0.0;  // pass when value < threshold (or <= for exact checks)
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  // Doubles one analytic gradient entry before each gradient check. Used to
  // confirm that the checker catches a broken backward pass.
  bool inject_gradient_fault = false;
};

std::vector<CheckResult> run_verification(const VerifyOptions& options);

}  // namespace twostage::cli

#endif  // TWOSTAGE_CLI_VERIFY_HPP_
