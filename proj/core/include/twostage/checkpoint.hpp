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

// "LMLP" model checkpoint files:
//
//   magic "LMLP" | version u32 | dim count u32 | dims u32[dim count] |
//   for each dense layer: weights f32[fan_out * fan_in] (row-major),
//                         bias f32[fan_out]
//
// All integers and floats little-endian. Parameters are narrowed to float32.

#ifndef TWOSTAGE_CHECKPOINT_HPP_
#define TWOSTAGE_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "twostage/nncore.hpp"

namespace twostage {

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string encode_model(const MlpModel& model);
MlpModel decode_model(std::string_view bytes);

void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace twostage

#endif  // TWOSTAGE_CHECKPOINT_HPP_
