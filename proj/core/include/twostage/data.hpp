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

// Labeled volumetric samples: the in-memory dataset model, the "LVOL" volume
// file, JSON Lines manifests, a seeded synthetic cohort generator, gender
// partitioning, class weighting and seeded mini-batch ordering.

#ifndef TWOSTAGE_DATA_HPP_
#define TWOSTAGE_DATA_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace twostage {

struct VolumeDims {
  std::size_t depth = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t voxel_count() const { return depth * height * width; }
  bool operator==(const VolumeDims&) const = default;
};

// Scalar grid, z-major then row-major: index = (z * height + y) * width + x.
class Volume {
 public:
  Volume() = default;
  // Zero-filled.
  explicit Volume(VolumeDims dims);
  Volume(VolumeDims dims, std::vector<float> voxels);

  const VolumeDims& dims() const { return dims_; }
  std::size_t size() const { return voxels_.size(); }

  float at(std::size_t z, std::size_t y, std::size_t x) const {
    return voxels_[(z * dims_.height + y) * dims_.width + x];
  }
  float& at(std::size_t z, std::size_t y, std::size_t x) {
    return voxels_[(z * dims_.height + y) * dims_.width + x];
  }

  const std::vector<float>& voxels() const { return voxels_; }
  std::vector<float>& voxels() { return voxels_; }

  bool all_finite() const;
  bool operator==(const Volume&) const = default;

 private:
  VolumeDims dims_;
  std::vector<float> voxels_;
};

enum class Gender : std::uint8_t { kFemale = 0, kMale = 1 };

enum class Disease : std::uint8_t {
  kAdenocarcinoma = 0,
  kSquamousCellCarcinoma = 1,
  kCovid19 = 2,
  kNormal = 3,
};

enum class Split : std::uint8_t { kTrain = 0, kVal = 1 };

inline constexpr std::size_t kNumDiseases = 4;
inline constexpr std::size_t kNumGenders = 2;

inline constexpr std::array<Disease, kNumDiseases> kAllDiseases = {
    Disease::kAdenocarcinoma, Disease::kSquamousCellCarcinoma, Disease::kCovid19,
    Disease::kNormal};

// Canonical manifest strings: "adenocarcinoma", "squamous_cell_carcinoma",
// "covid19", "normal"; "F"/"M"; "train"/"val".
std::string_view to_string(Disease d);
std::string_view to_string(Gender g);
std::string_view to_string(Split s);
std::optional<Disease> parse_disease(std::string_view s);
std::optional<Gender> parse_gender(std::string_view s);
std::optional<Split> parse_split(std::string_view s);

// Human-readable class names for reports.
std::string_view display_name(Disease d);

inline std::size_t index_of(Disease d) { return static_cast<std::size_t>(d); }
inline std::size_t index_of(Gender g) { return static_cast<std::size_t>(g); }

struct Sample {
  std::string id;
  Volume volume;
  Gender gender = Gender::kFemale;
  Disease disease = Disease::kNormal;
  Split split = Split::kTrain;
};

class Dataset {
 public:
  Dataset() = default;
  // Throws InvalidInput on duplicate ids.
  explicit Dataset(std::vector<Sample> samples);

  void add(Sample sample);

  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }

  // Samples of one split, order preserved.
  Dataset subset(Split split) const;
  std::size_t count(Split split) const;

 private:
  std::vector<Sample> samples_;
};

// Per-cell sample counts indexed [disease][gender][split].
using CohortCounts = std::array<std::array<std::array<std::size_t, 2>, kNumGenders>, kNumDiseases>;

// Train F/M and val F/M counts per disease of the reference cohort.
CohortCounts reference_cohort_counts();

struct CohortSpec {
  CohortCounts counts = reference_cohort_counts();
  double noise_sigma = 0.1;
  double gender_shift = 0.1;
  double class_separation = 0.2;
  VolumeDims dims{16, 64, 64};
  std::uint64_t seed = 0;

  std::size_t total() const;
  // Throws ConfigError.
  void validate() const;
};

// Renders every cell of the spec. Sample i draws from its own stream derived
// from (seed, i), so the output does not depend on generation order.
Dataset generate_synthetic(const CohortSpec& spec);

// Renders one volume of the cohort; exposed for inspection and tests.
Volume render_synthetic_volume(const CohortSpec& spec, Disease disease, Gender gender,
                               std::uint64_t sample_index);

struct GenderPartition {
  Dataset male;
  Dataset female;
};

GenderPartition split_by_gender(const Dataset& dataset);

struct ClassWeights {
  std::vector<double> weights;
  std::vector<std::size_t> counts;
  // Classes with no samples; their weight is 0.
  std::vector<std::size_t> empty_classes;
};

// w_c = N / (C * n_c) over the given class labels.
ClassWeights class_weights(std::span<const std::size_t> labels, std::size_t num_classes);
// Disease weights over every sample of the dataset.
ClassWeights class_weights(const Dataset& dataset);

// Seeded permutation of [0, n) for the given epoch, chunked into batches of
// batch_size. The last batch may be short.
std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                              std::uint64_t seed, std::uint64_t epoch);
std::vector<std::vector<std::size_t>> batches(const Dataset& dataset, std::size_t batch_size,
                                              std::uint64_t seed, std::uint64_t epoch);

// "LVOL" volume files: magic | version u32 | depth, height, width u32 |
// float32 voxels, all little-endian.
inline constexpr std::uint32_t kVolumeFormatVersion = 1;
inline constexpr std::size_t kVolumeHeaderBytes = 20;

std::string encode_volume(const Volume& volume);
Volume decode_volume(std::string_view bytes);
void save_volume(const Volume& volume, const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);

struct ManifestRecord {
  std::string id;
  std::string volume;  // path, relative to the manifest's directory unless absolute
  Gender gender = Gender::kFemale;
  Disease disease = Disease::kNormal;
  Split split = Split::kTrain;
};

// Parses JSON Lines; blank lines are skipped. Unknown labels raise FormatError
// naming the record id.
std::vector<ManifestRecord> parse_manifest(std::string_view text);
std::string format_manifest(const std::vector<ManifestRecord>& records);

// Reads the manifest and every volume it references.
Dataset load_manifest(const std::filesystem::path& path);

// Writes volumes/<id>.lvol for every sample plus manifest.jsonl into dir, and
// returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace twostage

#endif  // TWOSTAGE_DATA_HPP_
