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

#ifndef TWOSTAGE_ERROR_HPP_
#define TWOSTAGE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace twostage {

// Errors are split by how a caller should react. Validation-type errors
// (InvalidInput, ConfigError, FormatError) mean the request itself was bad;
// IoError and NumericError are runtime failures. The CLI maps the first group
// to exit code 1 and the second to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller-supplied value violates an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A configuration document or option is out of its valid range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A file does not follow its binary or text layout, or carries a label outside
// the closed label sets.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace twostage

#endif  // TWOSTAGE_ERROR_HPP_
