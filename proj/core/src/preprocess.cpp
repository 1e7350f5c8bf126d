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

#include "twostage/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "twostage/error.hpp"

namespace twostage {

std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::kZScore: return "zscore";
    case Normalization::kMinMax: return "minmax";
    case Normalization::kNone: return "none";
  }
  return "none";
}

std::optional<Normalization> parse_normalization(std::string_view s) {
  if (s == "zscore") return Normalization::kZScore;
  if (s == "minmax") return Normalization::kMinMax;
  if (s == "none") return Normalization::kNone;
  return std::nullopt;
}

void PreprocessConfig::validate() const {
  const auto in_range = [](double f) { return f >= 0.0 && f <= 0.45; };
  if (!in_range(trim_low_frac) || !in_range(trim_high_frac)) {
    throw ConfigError("trim fractions must lie in [0, 0.45]");
  }
  if (!(trim_low_frac + trim_high_frac < 1.0)) {
    throw ConfigError("trim fractions must sum below 1");
  }
  if (target_dims.voxel_count() == 0) throw ConfigError("target dims must be positive");
}

Volume trim_slices(const Volume& volume, double low_frac, double high_frac) {
  if (!(low_frac >= 0.0) || !(high_frac >= 0.0) || !(low_frac + high_frac < 1.0)) {
    throw ConfigError("trim fractions must be non-negative and sum below 1");
  }
  const VolumeDims& dims = volume.dims();
  const auto depth = static_cast<double>(dims.depth);
  const auto low = static_cast<std::size_t>(std::floor(low_frac * depth));
  const auto high = static_cast<std::size_t>(std::floor(high_frac * depth));
  if (low + high >= dims.depth) {
    throw ConfigError("trimming " + std::to_string(low) + "+" + std::to_string(high) +
                      " of " + std::to_string(dims.depth) + " slices leaves none");
  }
  const std::size_t plane = dims.height * dims.width;
  const auto first = volume.voxels().begin() + static_cast<std::ptrdiff_t>(low * plane);
  const auto last =
      volume.voxels().begin() + static_cast<std::ptrdiff_t>((dims.depth - high) * plane);
  return Volume({dims.depth - low - high, dims.height, dims.width}, std::vector<float>(first, last));
}

namespace {

struct AxisSample {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

std::vector<AxisSample> axis_samples(std::size_t src, std::size_t dst) {
  std::vector<AxisSample> out(dst);
  for (std::size_t i = 0; i < dst; ++i) {
    if (src == 1 || dst == 1) {
      // A single output sample sits on the first source voxel.
      out[i] = {0, 0, 0.0};
      continue;
    }
    const double pos =
        static_cast<double>(i) * static_cast<double>(src - 1) / static_cast<double>(dst - 1);
    const auto lo = std::min(static_cast<std::size_t>(pos), src - 1);
    const std::size_t hi = std::min(lo + 1, src - 1);
    out[i] = {lo, hi, pos - static_cast<double>(lo)};
  }
  return out;
}

}  // namespace

Volume resize(const Volume& volume, const VolumeDims& target) {
  const VolumeDims& src = volume.dims();
  if (src.voxel_count() == 0 || target.voxel_count() == 0) {
    throw InvalidInput("resize needs positive source and target dims");
  }
  if (src == target) return volume;

  const auto zs = axis_samples(src.depth, target.depth);
  const auto ys = axis_samples(src.height, target.height);
  const auto xs = axis_samples(src.width, target.width);
  const auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };

  Volume out(target);
  for (std::size_t z = 0; z < target.depth; ++z) {
    const auto& sz = zs[z];
    for (std::size_t y = 0; y < target.height; ++y) {
      const auto& sy = ys[y];
      for (std::size_t x = 0; x < target.width; ++x) {
        const auto& sx = xs[x];
        const auto plane = [&](std::size_t zi) {
          const double top = lerp(volume.at(zi, sy.lo, sx.lo), volume.at(zi, sy.lo, sx.hi), sx.frac);
          const double bottom =
              lerp(volume.at(zi, sy.hi, sx.lo), volume.at(zi, sy.hi, sx.hi), sx.frac);
          return lerp(top, bottom, sy.frac);
        };
        out.at(z, y, x) = static_cast<float>(lerp(plane(sz.lo), plane(sz.hi), sz.frac));
      }
    }
  }
  return out;
}

NormalizeResult normalize(const Volume& volume, Normalization mode) {
  if (mode == Normalization::kNone) return {volume, false};
  const auto& v = volume.voxels();
  const auto n = static_cast<double>(v.size());
  double shift = 0.0;
  double scale = 0.0;
  if (mode == Normalization::kZScore) {
    double sum = 0.0;
    for (float x : v) sum += x;
    const double mean = sum / n;
    double sq = 0.0;
    for (float x : v) sq += (x - mean) * (x - mean);
    shift = mean;
    scale = std::sqrt(sq / n);
  } else {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    shift = *lo;
    scale = static_cast<double>(*hi) - static_cast<double>(*lo);
  }
  if (!(scale > 0.0)) return {Volume(volume.dims()), true};

  std::vector<float> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(),
                 [&](float x) { return static_cast<float>((x - shift) / scale); });
  return {Volume(volume.dims(), std::move(out)), false};
}

std::vector<double> featurize(const Volume& volume, const PreprocessConfig& config) {
  config.validate();
  const Volume trimmed = trim_slices(volume, config.trim_low_frac, config.trim_high_frac);
  const Volume resized = resize(trimmed, config.target_dims);
  const NormalizeResult normalized = normalize(resized, config.normalization);
  return {normalized.volume.voxels().begin(), normalized.volume.voxels().end()};
}

}  // namespace twostage
