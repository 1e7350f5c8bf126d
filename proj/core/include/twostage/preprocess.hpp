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

// Volume preprocessing ahead of the network: discard end slices, resample to a
// fixed grid, normalize intensities and flatten.

#ifndef TWOSTAGE_PREPROCESS_HPP_
#define TWOSTAGE_PREPROCESS_HPP_

#include <vector>

#include "twostage/data.hpp"

namespace twostage {

enum class Normalization { kZScore, kMinMax, kNone };

std::string_view to_string(Normalization n);
std::optional<Normalization> parse_normalization(std::string_view s);

struct PreprocessConfig {
  double trim_low_frac = 0.1;
  double trim_high_frac = 0.1;
  VolumeDims target_dims{8, 32, 32};
  Normalization normalization = Normalization::kZScore;

  std::size_t feature_length() const { return target_dims.voxel_count(); }
  // Throws ConfigError.
  void validate() const;
  bool operator==(const PreprocessConfig&) const = default;
};

// Keeps slices [floor(low * D), D - floor(high * D)).
Volume trim_slices(const Volume& volume, double low_frac, double high_frac);

// Trilinear resampling on corner-aligned grids: output index i maps to source
// coordinate i * (n_src - 1) / (n_dst - 1) along each axis.
Volume resize(const Volume& volume, const VolumeDims& target);

struct NormalizeResult {
  Volume volume;
  // Set when the statistics are degenerate; the volume is then all zeros.
  bool degenerate = false;
};

NormalizeResult normalize(const Volume& volume, Normalization mode);

// trim -> resize -> normalize -> flatten (z-major, row-major).
std::vector<double> featurize(const Volume& volume, const PreprocessConfig& config);

}  // namespace twostage

#endif  // TWOSTAGE_PREPROCESS_HPP_
