// Copyright 2026 The esdd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace esdd {

enum class SourceId { D1 = 1, D2, D3, D4, D5, D6 };
enum class AudioType { Monophonic, Polyphonic };
enum class Label { Real, Fake };
enum class DeepfakeType { None, TTA, ATA };
enum class ModelId { None = 0, G1, G2, G3, G4, G5 };
enum class Split { Unassigned, Train, Valid, Test };

inline constexpr std::array<SourceId, 6> kAllSources = {
    SourceId::D1, SourceId::D2, SourceId::D3,
    SourceId::D4, SourceId::D5, SourceId::D6};
inline constexpr std::array<ModelId, 5> kAllModels = {
    ModelId::G1, ModelId::G2, ModelId::G3, ModelId::G4, ModelId::G5};

std::string_view to_string(SourceId v);
std::string_view to_string(AudioType v);
std::string_view to_string(Label v);
std::string_view to_string(DeepfakeType v);
std::string_view to_string(ModelId v);
std::string_view to_string(Split v);

// Parsers throw Error(ErrorKind::Argument) on unknown tokens.
SourceId parse_source(std::string_view s);
AudioType parse_audio_type(std::string_view s);
Label parse_label(std::string_view s);
DeepfakeType parse_deepfake_type(std::string_view s);
ModelId parse_model(std::string_view s);
Split parse_split(std::string_view s);

}  // namespace esdd
