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

#ifndef TWOSTAGE_CLI_CLI_HPP_
#define TWOSTAGE_CLI_CLI_HPP_

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace twostage::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;  // bad input, config or file layout
inline constexpr int kExitRuntime = 2;     // I/O, numeric failure, failed verification

int exit_code_for(const std::exception& error);

// Runs `twostage <args...>` in-process. `args` excludes the program name.
// Returns the exit code; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace twostage::cli

#endif  // TWOSTAGE_CLI_CLI_HPP_
