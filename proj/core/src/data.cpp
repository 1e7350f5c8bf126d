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

#include "twostage/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "twostage/binary_io.hpp"
#include "twostage/error.hpp"
#include "twostage/random.hpp"

namespace twostage {

Volume::Volume(VolumeDims dims) : dims_(dims), voxels_(dims.voxel_count(), 0.0f) {
  if (dims.depth == 0 || dims.height == 0 || dims.width == 0) {
    throw InvalidInput("volume dims must be positive");
  }
}

Volume::Volume(VolumeDims dims, std::vector<float> voxels)
    : dims_(dims), voxels_(std::move(voxels)) {
  if (dims.depth == 0 || dims.height == 0 || dims.width == 0) {
    throw InvalidInput("volume dims must be positive");
  }
  if (voxels_.size() != dims.voxel_count()) {
    throw InvalidInput("voxel count " + std::to_string(voxels_.size()) +
                       " does not match dims product " + std::to_string(dims.voxel_count()));
  }
}

bool Volume::all_finite() const {
  return std::all_of(voxels_.begin(), voxels_.end(), [](float v) { return std::isfinite(v); });
}

std::string_view to_string(Disease d) {
  switch (d) {
    case Disease::kAdenocarcinoma: return "adenocarcinoma";
    case Disease::kSquamousCellCarcinoma: return "squamous_cell_carcinoma";
    case Disease::kCovid19: return "covid19";
    case Disease::kNormal: return "normal";
  }
  return "unknown";
}

std::string_view display_name(Disease d) {
  switch (d) {
    case Disease::kAdenocarcinoma: return "Adenocarcinoma";
    case Disease::kSquamousCellCarcinoma: return "Squamous Cell Carcinoma";
    case Disease::kCovid19: return "COVID-19";
    case Disease::kNormal: return "Normal";
  }
  return "Unknown";
}

std::string_view to_string(Gender g) { return g == Gender::kMale ? "M" : "F"; }
std::string_view to_string(Split s) { return s == Split::kTrain ? "train" : "val"; }

std::optional<Disease> parse_disease(std::string_view s) {
  for (Disease d : kAllDiseases) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

std::optional<Gender> parse_gender(std::string_view s) {
  if (s == "F") return Gender::kFemale;
  if (s == "M") return Gender::kMale;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  return std::nullopt;
}

Dataset::Dataset(std::vector<Sample> samples) {
  samples_.reserve(samples.size());
  for (auto& s : samples) add(std::move(s));
}

void Dataset::add(Sample sample) {
  // Linear scan keeps Dataset a plain value type; datasets here are small.
  for (const auto& s : samples_) {
    if (s.id == sample.id) throw InvalidInput("duplicate sample id '" + sample.id + "'");
  }
  samples_.push_back(std::move(sample));
}

Dataset Dataset::subset(Split split) const {
  Dataset out;
  for (const auto& s : samples_) {
    if (s.split == split) out.samples_.push_back(s);
  }
  return out;
}

std::size_t Dataset::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      samples_.begin(), samples_.end(), [&](const Sample& s) { return s.split == split; }));
}

CohortCounts reference_cohort_counts() {
  CohortCounts c{};
  auto set = [&](Disease d, std::size_t train_f, std::size_t train_m, std::size_t val_f,
                 std::size_t val_m) {
    auto& cell = c[index_of(d)];
    cell[index_of(Gender::kFemale)] = {train_f, val_f};
    cell[index_of(Gender::kMale)] = {train_m, val_m};
  };
  set(Disease::kAdenocarcinoma, 125, 125, 25, 25);
  set(Disease::kSquamousCellCarcinoma, 5, 79, 13, 12);
  set(Disease::kCovid19, 100, 100, 20, 20);
  set(Disease::kNormal, 100, 100, 20, 20);
  return c;
}

std::size_t CohortSpec::total() const {
  std::size_t n = 0;
  for (const auto& by_gender : counts) {
    for (const auto& by_split : by_gender) n += by_split[0] + by_split[1];
  }
  return n;
}

void CohortSpec::validate() const {
  if (total() == 0) throw ConfigError("cohort spec requests zero samples");
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("noise_sigma must be positive");
  }
  if (!(gender_shift >= 0.0) || !std::isfinite(gender_shift)) {
    throw ConfigError("gender_shift must be non-negative");
  }
  if (!(class_separation > 0.0) || !std::isfinite(class_separation)) {
    throw ConfigError("class_separation must be positive");
  }
  if (dims.depth == 0 || dims.height == 0 || dims.width == 0) {
    throw ConfigError("cohort volume dims must be positive");
  }
}

namespace {

// Per-axis Gaussian profile at normalized voxel centers (i + 0.5) / n.
std::vector<double> profile(std::size_t n, double center, double sigma) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = ((static_cast<double>(i) + 0.5) / static_cast<double>(n) - center) / sigma;
    out[i] = std::exp(-0.5 * t * t);
  }
  return out;
}

void add_blob(std::vector<double>& grid, const VolumeDims& dims, std::array<double, 3> center,
              std::array<double, 3> sigma, double amplitude) {
  const auto pz = profile(dims.depth, center[0], sigma[0]);
  const auto py = profile(dims.height, center[1], sigma[1]);
  const auto px = profile(dims.width, center[2], sigma[2]);
  std::size_t i = 0;
  for (std::size_t z = 0; z < dims.depth; ++z) {
    for (std::size_t y = 0; y < dims.height; ++y) {
      const double zy = amplitude * pz[z] * py[y];
      for (std::size_t x = 0; x < dims.width; ++x) grid[i++] += zy * px[x];
    }
  }
}

std::string sample_id(Split split, Disease disease, Gender gender, std::size_t k) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s-%s-%s-%04zu", std::string(to_string(split)).c_str(),
                std::string(to_string(disease)).c_str(), std::string(to_string(gender)).c_str(),
                k);
  return buf;
}

}  // namespace

Volume render_synthetic_volume(const CohortSpec& spec, Disease disease, Gender gender,
                               std::uint64_t sample_index) {
  Rng rng(spec.seed, Stream::kCohortSample, sample_index);
  const VolumeDims& dims = spec.dims;
  std::vector<double> grid(dims.voxel_count(), 0.0);

  // Every displacement that gender causes is along x.
  const double shift = gender == Gender::kMale ? spec.gender_shift : -spec.gender_shift;

  // Two broad background lobes present in every scan.
  for (double lobe_x : {0.3, 0.7}) {
    add_blob(grid, dims, {0.5, 0.5, lobe_x + shift}, {0.3, 0.2, 0.12}, 0.6);
  }

  // Draws happen for every class so the noise stream lines up across classes.
  const double jz = rng.normal(0.0, 0.02);
  const double jy = rng.normal(0.0, 0.02);
  const double jx = rng.normal(0.0, 0.02);
  const double amplitude = 1.0 + rng.normal(0.0, 0.1);
  if (disease != Disease::kNormal) {
    const double slot = static_cast<double>(index_of(disease)) - 1.0;
    add_blob(grid, dims, {0.5 + jz, 0.5 + jy, 0.5 + slot * spec.class_separation + shift + jx},
             {0.15, 0.08, 0.06}, amplitude);
  }

  for (double& v : grid) v += rng.normal(0.0, spec.noise_sigma);

  // Uninformative end slices (neck and abdomen stand-ins) carry strong clutter.
  const std::size_t end_slices = dims.depth / 16;
  const std::size_t plane = dims.height * dims.width;
  for (std::size_t z = 0; z < dims.depth; ++z) {
    if (z >= end_slices && z + end_slices < dims.depth) continue;
    for (std::size_t i = 0; i < plane; ++i) grid[z * plane + i] += rng.uniform(-2.0, 2.0);
  }

  std::vector<float> voxels(grid.size());
  std::transform(grid.begin(), grid.end(), voxels.begin(),
                 [](double v) { return static_cast<float>(v); });
  return Volume(dims, std::move(voxels));
}

Dataset generate_synthetic(const CohortSpec& spec) {
  spec.validate();
  std::vector<Sample> samples;
  samples.reserve(spec.total());
  std::uint64_t index = 0;
  for (Split split : {Split::kTrain, Split::kVal}) {
    for (Disease disease : kAllDiseases) {
      for (Gender gender : {Gender::kFemale, Gender::kMale}) {
        const std::size_t n =
            spec.counts[index_of(disease)][index_of(gender)][static_cast<std::size_t>(split)];
        for (std::size_t k = 0; k < n; ++k) {
          samples.push_back({sample_id(split, disease, gender, k),
                             render_synthetic_volume(spec, disease, gender, index++), gender,
                             disease, split});
        }
      }
    }
  }
  return Dataset(std::move(samples));
}

GenderPartition split_by_gender(const Dataset& dataset) {
  GenderPartition out;
  std::vector<Sample> male;
  std::vector<Sample> female;
  for (const auto& s : dataset.samples()) {
    (s.gender == Gender::kMale ? male : female).push_back(s);
  }
  out.male = Dataset(std::move(male));
  out.female = Dataset(std::move(female));
  return out;
}

ClassWeights class_weights(std::span<const std::size_t> labels, std::size_t num_classes) {
  if (labels.empty()) throw InvalidInput("class weights of an empty label set");
  if (num_classes == 0) throw InvalidInput("class weights need at least one class");
  ClassWeights out;
  out.counts.assign(num_classes, 0);
  for (std::size_t y : labels) {
    if (y >= num_classes) throw InvalidInput("label " + std::to_string(y) + " out of range");
    ++out.counts[y];
  }
  const double total = static_cast<double>(labels.size());
  out.weights.assign(num_classes, 0.0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (out.counts[c] == 0) {
      out.empty_classes.push_back(c);
    } else {
      out.weights[c] =
          total / (static_cast<double>(num_classes) * static_cast<double>(out.counts[c]));
    }
  }
  return out;
}

ClassWeights class_weights(const Dataset& dataset) {
  std::vector<std::size_t> labels;
  labels.reserve(dataset.size());
  for (const auto& s : dataset.samples()) labels.push_back(index_of(s.disease));
  return class_weights(labels, kNumDiseases);
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                              std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) throw InvalidInput("batch_size must be at least 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, Stream::kBatchOrder, epoch);
  // Fisher-Yates, written out so the permutation is identical across
  // standard library implementations.
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return out;
}

std::vector<std::vector<std::size_t>> batches(const Dataset& dataset, std::size_t batch_size,
                                              std::uint64_t seed, std::uint64_t epoch) {
  return batches(dataset.size(), batch_size, seed, epoch);
}

namespace {
constexpr std::string_view kVolumeMagic = "LVOL";
}

std::string encode_volume(const Volume& volume) {
  std::string out(kVolumeMagic);
  out.reserve(kVolumeHeaderBytes + 4 * volume.size());
  binary::put_u32(out, kVolumeFormatVersion);
  binary::put_u32(out, static_cast<std::uint32_t>(volume.dims().depth));
  binary::put_u32(out, static_cast<std::uint32_t>(volume.dims().height));
  binary::put_u32(out, static_cast<std::uint32_t>(volume.dims().width));
  for (float v : volume.voxels()) binary::put_f32(out, v);
  return out;
}

Volume decode_volume(std::string_view bytes) {
  binary::Reader in(bytes, "volume file");
  if (in.take(4) != kVolumeMagic) throw FormatError("volume file: bad magic");
  const std::uint32_t version = in.u32();
  if (version != kVolumeFormatVersion) {
    throw FormatError("volume file: unsupported version " + std::to_string(version));
  }
  VolumeDims dims;
  dims.depth = in.u32();
  dims.height = in.u32();
  dims.width = in.u32();
  if (dims.voxel_count() == 0) throw FormatError("volume file: zero dimension");
  if (in.remaining() != 4 * dims.voxel_count()) {
    throw FormatError("volume file: payload is " + std::to_string(in.remaining()) +
                      " bytes, expected " + std::to_string(4 * dims.voxel_count()));
  }
  std::vector<float> voxels(dims.voxel_count());
  for (float& v : voxels) v = in.f32();
  Volume volume(dims, std::move(voxels));
  if (!volume.all_finite()) throw FormatError("volume file: non-finite voxel");
  return volume;
}

void save_volume(const Volume& volume, const std::filesystem::path& path) {
  binary::write_file(path, encode_volume(volume));
}

Volume load_volume(const std::filesystem::path& path) {
  return decode_volume(binary::read_file(path));
}

std::vector<ManifestRecord> parse_manifest(std::string_view text) {
  std::vector<ManifestRecord> out;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    const std::string where = "manifest line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where + ": " + e.what());
    }
    const auto field = [&](const char* key) -> std::string {
      if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
        throw FormatError(where + ": missing string field '" + key + "'");
      }
      return j[key].get<std::string>();
    };
    ManifestRecord r;
    r.id = field("id");
    r.volume = field("volume");
    const std::string gender = field("gender");
    const std::string disease = field("disease");
    const std::string split = field("split");
    const auto g = parse_gender(gender);
    const auto d = parse_disease(disease);
    const auto s = parse_split(split);
    if (!g) throw FormatError("sample '" + r.id + "': unknown gender '" + gender + "'");
    if (!d) throw FormatError("sample '" + r.id + "': unknown disease '" + disease + "'");
    if (!s) throw FormatError("sample '" + r.id + "': unknown split '" + split + "'");
    if (!seen.insert(r.id).second) throw FormatError("duplicate sample id '" + r.id + "'");
    r.gender = *g;
    r.disease = *d;
    r.split = *s;
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_manifest(const std::vector<ManifestRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["volume"] = r.volume;
    j["gender"] = to_string(r.gender);
    j["disease"] = to_string(r.disease);
    j["split"] = to_string(r.split);
    out += j.dump();
    out += '\n';
  }
  return out;
}

Dataset load_manifest(const std::filesystem::path& path) {
  const auto records = parse_manifest(binary::read_file(path));
  const auto base = path.parent_path();
  std::vector<Sample> samples;
  samples.reserve(records.size());
  for (const auto& r : records) {
    std::filesystem::path volume_path(r.volume);
    if (volume_path.is_relative()) volume_path = base / volume_path;
    samples.push_back({r.id, load_volume(volume_path), r.gender, r.disease, r.split});
  }
  return Dataset(std::move(samples));
}

std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "volumes", ec);
  if (ec) throw IoError("cannot create " + (dir / "volumes").string() + ": " + ec.message());
  std::vector<ManifestRecord> records;
  records.reserve(dataset.size());
  for (const auto& s : dataset.samples()) {
    const std::string rel = "volumes/" + s.id + ".lvol";
    save_volume(s.volume, dir / rel);
    records.push_back({s.id, rel, s.gender, s.disease, s.split});
  }
  const auto manifest = dir / "manifest.jsonl";
  binary::write_file(manifest, format_manifest(records));
  return manifest;
}

}  // namespace twostage
