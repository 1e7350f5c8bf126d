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

#include <algorithm>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "twostage/binary_io.hpp"
#include "twostage/data.hpp"
#include "twostage/error.hpp"

namespace twostage {
namespace {

// The reference counts with small volumes so the cohort renders quickly.
CohortSpec small_reference_spec(std::uint64_t seed) {
  CohortSpec spec;
  spec.dims = {4, 8, 8};
  spec.seed = seed;
  return spec;
}

std::size_t cell(const Dataset& d, Disease disease, Gender gender, Split split) {
  return static_cast<std::size_t>(std::count_if(d.samples().begin(), d.samples().end(),
                                                [&](const Sample& s) {
                                                  return s.disease == disease &&
                                                         s.gender == gender && s.split == split;
                                                }));
}

Sample make_sample(std::string id, Gender g, Disease d = Disease::kNormal,
                   Split s = Split::kTrain) {
  return {std::move(id), Volume({1, 1, 1}), g, d, s};
}

TEST(Synthetic, ReferenceCountsPerCell) {
  const auto data = generate_synthetic(small_reference_spec(0));
  struct Expected {
    Disease disease;
    std::size_t train_f, train_m, val_f, val_m;
  };
  const Expected table[] = {{Disease::kAdenocarcinoma, 125, 125, 25, 25},
                            {Disease::kSquamousCellCarcinoma, 5, 79, 13, 12},
                            {Disease::kCovid19, 100, 100, 20, 20},
                            {Disease::kNormal, 100, 100, 20, 20}};
  for (const auto& row : table) {
    EXPECT_EQ(cell(data, row.disease, Gender::kFemale, Split::kTrain), row.train_f);
    EXPECT_EQ(cell(data, row.disease, Gender::kMale, Split::kTrain), row.train_m);
    EXPECT_EQ(cell(data, row.disease, Gender::kFemale, Split::kVal), row.val_f);
    EXPECT_EQ(cell(data, row.disease, Gender::kMale, Split::kVal), row.val_m);
  }
  EXPECT_EQ(data.count(Split::kTrain), 734u);
  EXPECT_EQ(data.count(Split::kVal), 155u);
}

TEST(Synthetic, ArbitraryCountsAreHonoured) {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    CohortSpec spec;
    spec.dims = {2, 4, 4};
    for (auto& d : spec.counts) {
      for (auto& g : d) {
        for (auto& s : g) s = rng.below(4);
      }
    }
    spec.counts[0][0][0] = 1;
    const auto data = generate_synthetic(spec);
    for (Disease d : kAllDiseases) {
      for (Gender g : {Gender::kFemale, Gender::kMale}) {
        for (Split s : {Split::kTrain, Split::kVal}) {
          EXPECT_EQ(cell(data, d, g, s),
                    spec.counts[index_of(d)][index_of(g)][static_cast<std::size_t>(s)]);
        }
      }
    }
  }
}

TEST(Synthetic, SeedDeterminesVoxels) {
  const auto a = generate_synthetic(small_reference_spec(5));
  const auto b = generate_synthetic(small_reference_spec(5));
  const auto c = generate_synthetic(small_reference_spec(6));
  ASSERT_EQ(a.size(), b.size());
  bool any_difference = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].volume, b[i].volume);
    any_difference = any_difference || !(a[i].volume == c[i].volume);
    EXPECT_TRUE(a[i].volume.all_finite());
  }
  EXPECT_TRUE(any_difference);
}

TEST(Synthetic, SampleRenderingIsOrderIndependent) {
  const auto spec = small_reference_spec(9);
  const auto data = generate_synthetic(spec);
  for (std::size_t i : {0u, 17u, 400u, 888u}) {
    EXPECT_EQ(render_synthetic_volume(spec, data[i].disease, data[i].gender, i), data[i].volume);
  }
}

TEST(Synthetic, RejectsEmptyAndInvalidSpecs) {
  CohortSpec spec;
  for (auto& d : spec.counts) {
    for (auto& g : d) g = {0, 0};
  }
  EXPECT_THROW(generate_synthetic(spec), ConfigError);
  spec = CohortSpec{};
  spec.noise_sigma = 0.0;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(SplitByGender, ReferenceTrainPartitionSizes) {
  const auto data = generate_synthetic(small_reference_spec(0)).subset(Split::kTrain);
  const auto parts = split_by_gender(data);
  EXPECT_EQ(parts.male.size(), 404u);
  EXPECT_EQ(parts.female.size(), 330u);
}

TEST(SplitByGender, PartitionPreservesOrder) {
  Dataset data({make_sample("a", Gender::kMale), make_sample("b", Gender::kFemale),
                make_sample("c", Gender::kMale), make_sample("d", Gender::kFemale)});
  const auto parts = split_by_gender(data);
  ASSERT_EQ(parts.male.size(), 2u);
  ASSERT_EQ(parts.female.size(), 2u);
  EXPECT_EQ(parts.male[0].id, "a");
  EXPECT_EQ(parts.male[1].id, "c");
  EXPECT_EQ(parts.female[0].id, "b");
  EXPECT_EQ(parts.female[1].id, "d");
}

TEST(SplitByGender, AllMaleLeavesFemaleEmpty) {
  Dataset data({make_sample("a", Gender::kMale), make_sample("b", Gender::kMale)});
  const auto parts = split_by_gender(data);
  EXPECT_EQ(parts.male.size(), 2u);
  EXPECT_TRUE(parts.female.empty());
}

TEST(SplitByGender, DisjointUnionOnRandomInputs) {
  Rng rng(4);
  std::vector<Sample> samples;
  for (int i = 0; i < 60; ++i) {
    samples.push_back(make_sample("s" + std::to_string(i),
                                  rng.below(2) ? Gender::kMale : Gender::kFemale));
  }
  const auto parts = split_by_gender(Dataset(samples));
  std::set<std::string> ids;
  for (const auto& s : parts.male.samples()) ids.insert(s.id);
  for (const auto& s : parts.female.samples()) EXPECT_TRUE(ids.insert(s.id).second);
  EXPECT_EQ(ids.size(), samples.size());
}

TEST(ClassWeights, MaleTrainSubset) {
  std::vector<std::size_t> labels;
  const std::size_t counts[] = {125, 79, 100, 100};
  for (std::size_t c = 0; c < 4; ++c) labels.insert(labels.end(), counts[c], c);
  const auto w = class_weights(labels, 4);
  EXPECT_NEAR(w.weights[0], 0.8080, 5e-5);
  EXPECT_NEAR(w.weights[1], 1.2785, 5e-5);
  EXPECT_NEAR(w.weights[2], 1.0100, 5e-5);
  EXPECT_NEAR(w.weights[3], 1.0100, 5e-5);
  EXPECT_TRUE(w.empty_classes.empty());
}

TEST(ClassWeights, PooledReferenceTrainSet) {
  const auto data = generate_synthetic(small_reference_spec(0)).subset(Split::kTrain);
  const auto w = class_weights(data);
  EXPECT_EQ(w.counts, (std::vector<std::size_t>{250, 84, 200, 200}));
  EXPECT_NEAR(w.weights[0], 0.7340, 5e-5);
  EXPECT_NEAR(w.weights[1], 2.1845, 5e-5);
  EXPECT_NEAR(w.weights[2], 0.9175, 5e-5);
  EXPECT_NEAR(w.weights[3], 0.9175, 5e-5);
}

TEST(ClassWeights, BalancedGivesOnes) {
  const std::vector<std::size_t> labels{0, 1, 2, 3, 3, 2, 1, 0};
  for (double w : class_weights(labels, 4).weights) EXPECT_DOUBLE_EQ(w, 1.0);
}

TEST(ClassWeights, WeightedCountsSumToTotal) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> labels{0, 1, 2, 3};
    labels.resize(4 + rng.below(200));
    for (std::size_t i = 4; i < labels.size(); ++i) labels[i] = rng.below(4);
    const auto w = class_weights(labels, 4);
    double sum = 0.0;
    for (std::size_t c = 0; c < 4; ++c) sum += w.weights[c] * static_cast<double>(w.counts[c]);
    EXPECT_NEAR(sum, static_cast<double>(labels.size()), 1e-9);
  }
}

TEST(ClassWeights, EmptyClassGetsZeroAndIsFlagged) {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> labels{0, 1, 2};
    labels.resize(3 + rng.below(100));
    for (std::size_t i = 3; i < labels.size(); ++i) labels[i] = rng.below(3);
    const auto w = class_weights(labels, 4);
    EXPECT_EQ(w.weights[3], 0.0);
    EXPECT_EQ(w.empty_classes, std::vector<std::size_t>{3});
    double sum = 0.0;
    for (std::size_t c = 0; c < 4; ++c) sum += w.weights[c] * static_cast<double>(w.counts[c]);
    // Each present class contributes N / C.
    EXPECT_NEAR(sum, 0.75 * static_cast<double>(labels.size()), 1e-9);
  }
}

TEST(Batches, SizesAndPermutation) {
  const auto b = batches(10, 8, 1, 0);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].size(), 8u);
  EXPECT_EQ(b[1].size(), 2u);

  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(100);
    const std::size_t bs = 1 + rng.below(12);
    std::vector<std::size_t> seen;
    for (const auto& batch : batches(n, bs, rng.next(), trial)) {
      EXPECT_LE(batch.size(), bs);
      seen.insert(seen.end(), batch.begin(), batch.end());
    }
    std::sort(seen.begin(), seen.end());
    ASSERT_EQ(seen.size(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(seen[i], i);
  }
}

TEST(Batches, SeedAndEpochDetermineOrder) {
  EXPECT_EQ(batches(50, 8, 3, 4), batches(50, 8, 3, 4));
  EXPECT_NE(batches(50, 8, 3, 4), batches(50, 8, 3, 5));
  EXPECT_NE(batches(50, 8, 3, 4), batches(50, 8, 4, 4));
  EXPECT_THROW(batches(5, 0, 0, 0), InvalidInput);
}

TEST(VolumeFile, RoundTripIsBitExact) {
  testing::TempDir dir("volume");
  Rng rng(3);
  Volume v({3, 4, 5});
  for (auto& x : v.voxels()) x = static_cast<float>(rng.normal());
  v.voxels()[7] = -0.0f;
  save_volume(v, dir / "v.lvol");
  const auto loaded = load_volume(dir / "v.lvol");
  EXPECT_EQ(loaded.dims(), v.dims());
  EXPECT_EQ(encode_volume(loaded), encode_volume(v));
  EXPECT_EQ(testing::read_text(dir / "v.lvol"), encode_volume(v));
}

TEST(VolumeFile, SingleVoxelLayout) {
  Volume v({1, 1, 1}, {0.5f});
  const auto bytes = encode_volume(v);
  ASSERT_EQ(bytes.size(), 4u + 4u * 4u + 4u);
  EXPECT_EQ(bytes.size(), kVolumeHeaderBytes + 4u);
  EXPECT_EQ(bytes.substr(0, 4), "LVOL");
  // 0.5f is 0x3f000000, stored little-endian.
  EXPECT_EQ(bytes.substr(20), std::string("\x00\x00\x00\x3f", 4));
}

TEST(VolumeFile, RejectsMalformedBytes) {
  auto bytes = encode_volume(Volume({1, 2, 2}));
  EXPECT_THROW(decode_volume(bytes.substr(0, bytes.size() - 2)), FormatError);
  EXPECT_THROW(decode_volume(bytes + "x"), FormatError);
  bytes[1] = 'X';
  EXPECT_THROW(decode_volume(bytes), FormatError);
}

TEST(Manifest, RoundTripThroughDirectory) {
  testing::TempDir dir("manifest");
  CohortSpec spec;
  spec.dims = {2, 3, 3};
  for (auto& d : spec.counts) {
    for (auto& g : d) g = {2, 1};
  }
  const auto data = generate_synthetic(spec);
  const auto manifest = write_dataset(data, dir.path());
  const auto loaded = load_manifest(manifest);
  ASSERT_EQ(loaded.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(loaded[i].id, data[i].id);
    EXPECT_EQ(loaded[i].volume, data[i].volume);
    EXPECT_EQ(loaded[i].gender, data[i].gender);
    EXPECT_EQ(loaded[i].disease, data[i].disease);
    EXPECT_EQ(loaded[i].split, data[i].split);
  }
}

TEST(Manifest, UnknownDiseaseNamesTheSample) {
  const std::string text =
      R"({"id":"ok-1","volume":"a.lvol","gender":"F","disease":"normal","split":"train"})"
      "\n"
      R"({"id":"case-042","volume":"b.lvol","gender":"M","disease":"melanoma","split":"val"})"
      "\n";
  try {
    parse_manifest(text);
    FAIL() << "expected a FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("case-042"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("melanoma"), std::string::npos);
  }
}

TEST(Manifest, RejectsBadGenderSplitAndDuplicates) {
  EXPECT_THROW(
      parse_manifest(R"({"id":"x","volume":"a","gender":"X","disease":"normal","split":"train"})"),
      FormatError);
  EXPECT_THROW(
      parse_manifest(R"({"id":"x","volume":"a","gender":"F","disease":"normal","split":"test"})"),
      FormatError);
  const std::string line =
      R"({"id":"x","volume":"a","gender":"F","disease":"normal","split":"train"})";
  EXPECT_THROW(parse_manifest(line + "\n" + line), FormatError);
  EXPECT_THROW(parse_manifest("{not json"), FormatError);
}

TEST(Manifest, FormatParsesBack) {
  std::vector<ManifestRecord> records{
      {"a", "volumes/a.lvol", Gender::kMale, Disease::kCovid19, Split::kVal},
      {"b", "/abs/b.lvol", Gender::kFemale, Disease::kSquamousCellCarcinoma, Split::kTrain}};
  const auto parsed = parse_manifest(format_manifest(records));
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[1].volume, "/abs/b.lvol");
  EXPECT_EQ(parsed[0].disease, Disease::kCovid19);
  EXPECT_EQ(format_manifest(parsed), format_manifest(records));
}

TEST(Dataset, RejectsDuplicateIds) {
  EXPECT_THROW(Dataset({make_sample("a", Gender::kMale), make_sample("a", Gender::kFemale)}),
               InvalidInput);
}

TEST(Labels, CanonicalStringsRoundTrip) {
  for (Disease d : kAllDiseases) EXPECT_EQ(parse_disease(to_string(d)), d);
  EXPECT_EQ(parse_gender("F"), Gender::kFemale);
  EXPECT_EQ(parse_gender("M"), Gender::kMale);
  EXPECT_FALSE(parse_disease("Normal").has_value());
  EXPECT_EQ(index_of(Disease::kSquamousCellCarcinoma), 1u);
}

}  // namespace
}  // namespace twostage
