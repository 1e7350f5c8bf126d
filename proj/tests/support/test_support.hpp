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

#ifndef TWOSTAGE_TESTS_TEST_SUPPORT_HPP_
#define TWOSTAGE_TESTS_TEST_SUPPORT_HPP_

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "twostage/nncore.hpp"
#include "twostage/random.hpp"

namespace twostage::testing {

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Contiguous booleans for std::span<const bool> parameters.
class Flags {
 public:
  explicit Flags(std::size_t n) : data_(new bool[n]()), size_(n) {}
  Flags(std::initializer_list<bool> init) : Flags(init.size()) {
    std::size_t i = 0;
    for (bool b : init) data_[i++] = b;
  }
  bool& operator[](std::size_t i) { return data_[i]; }
  bool operator[](std::size_t i) const { return data_[i]; }
  std::size_t size() const { return size_; }
  operator std::span<const bool>() const { return {data_.get(), size_}; }

 private:
  std::unique_ptr<bool[]> data_;
  std::size_t size_;
};

// Model with every weight and bias drawn uniformly from [-scale, scale].
MlpModel random_model(const std::vector<std::size_t>& dims, Rng& rng, double scale = 0.5);

// (rows x cols) matrix of standard normal draws.
Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// Every regular file under dir, keyed by relative path, mapped to its bytes.
std::vector<std::pair<std::string, std::string>> directory_snapshot(
    const std::filesystem::path& dir);

std::string read_text(const std::filesystem::path& path);

}  // namespace twostage::testing

#endif  // TWOSTAGE_TESTS_TEST_SUPPORT_HPP_
