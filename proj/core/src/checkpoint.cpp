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

#include "twostage/checkpoint.hpp"

#include "twostage/binary_io.hpp"
#include "twostage/error.hpp"

namespace twostage {

namespace {
constexpr std::string_view kMagic = "LMLP";
}

std::string encode_model(const MlpModel& model) {
  const auto& dims = model.layer_dims();
  std::string out(kMagic);
  binary::put_u32(out, kModelFormatVersion);
  binary::put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (std::size_t d : dims) binary::put_u32(out, static_cast<std::uint32_t>(d));
  for (const auto& layer : model.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        binary::put_f32(out, static_cast<float>(layer.weight(r, c)));
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      binary::put_f32(out, static_cast<float>(layer.bias[r]));
    }
  }
  return out;
}

MlpModel decode_model(std::string_view bytes) {
  binary::Reader in(bytes, "model checkpoint");
  if (in.take(4) != kMagic) throw FormatError("model checkpoint: bad magic");
  const std::uint32_t version = in.u32();
  if (version != kModelFormatVersion) {
    throw FormatError("model checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  if (count < 2 || count > 64) {
    throw FormatError("model checkpoint: implausible layer count " + std::to_string(count));
  }
  std::vector<std::size_t> dims(count);
  std::size_t expected = 0;
  for (auto& d : dims) {
    d = in.u32();
    if (d == 0) throw FormatError("model checkpoint: zero layer width");
  }
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    expected += (dims[l] * dims[l + 1] + dims[l + 1]) * 4;
  }
  if (in.remaining() != expected) {
    throw FormatError("model checkpoint: payload is " + std::to_string(in.remaining()) +
                      " bytes, expected " + std::to_string(expected));
  }
  MlpModel model(dims);
  for (auto& layer : model.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = in.f32();
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = in.f32();
  }
  if (!model.all_finite()) throw FormatError("model checkpoint: non-finite parameter");
  return model;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  binary::write_file(path, encode_model(model));
}

MlpModel load_model(const std::filesystem::path& path) {
  return decode_model(binary::read_file(path));
}

}  // namespace twostage
