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

#include "esdd/error.hpp"
#include "esdd/hash.hpp"
#include "esdd/types.hpp"

#include <cstdio>

namespace esdd {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config error";
    case ErrorKind::Argument: return "argument error";
    case ErrorKind::Decode: return "decode error";
    case ErrorKind::EmptyInput: return "empty-input error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Manifest: return "manifest error";
    case ErrorKind::Caption: return "caption error";
    case ErrorKind::Metadata: return "metadata error";
    case ErrorKind::Plan: return "plan error";
    case ErrorKind::Adapter: return "adapter error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Length: return "length error";
    case ErrorKind::Feature: return "feature error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Protocol: return "protocol error";
    case ErrorKind::Io: return "io error";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) {
  return kind == ErrorKind::Config ? kExitConfig : kExitData;
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& table,
             const char* what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  fail(ErrorKind::Argument, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, SourceId>, 6> kSourceNames = {{
    {"D1", SourceId::D1}, {"D2", SourceId::D2}, {"D3", SourceId::D3},
    {"D4", SourceId::D4}, {"D5", SourceId::D5}, {"D6", SourceId::D6}}};
constexpr std::array<std::pair<std::string_view, AudioType>, 2> kAudioTypeNames = {{
    {"monophonic", AudioType::Monophonic}, {"polyphonic", AudioType::Polyphonic}}};
constexpr std::array<std::pair<std::string_view, Label>, 2> kLabelNames = {{
    {"real", Label::Real}, {"fake", Label::Fake}}};
constexpr std::array<std::pair<std::string_view, DeepfakeType>, 3> kDeepfakeNames = {{
    {"none", DeepfakeType::None}, {"TTA", DeepfakeType::TTA}, {"ATA", DeepfakeType::ATA}}};
constexpr std::array<std::pair<std::string_view, ModelId>, 6> kModelNames = {{
    {"none", ModelId::None}, {"G1", ModelId::G1}, {"G2", ModelId::G2},
    {"G3", ModelId::G3}, {"G4", ModelId::G4}, {"G5", ModelId::G5}}};
constexpr std::array<std::pair<std::string_view, Split>, 4> kSplitNames = {{
    {"unassigned", Split::Unassigned}, {"train", Split::Train},
    {"valid", Split::Valid}, {"test", Split::Test}}};

template <typename E, std::size_t N>
std::string_view name_of(E v, const std::array<std::pair<std::string_view, E>, N>& table) {
  for (const auto& [name, value] : table) {
    if (value == v) return name;
  }
  return "?";
}

}  // namespace

std::string_view to_string(SourceId v) { return name_of(v, kSourceNames); }
std::string_view to_string(AudioType v) { return name_of(v, kAudioTypeNames); }
std::string_view to_string(Label v) { return name_of(v, kLabelNames); }
std::string_view to_string(DeepfakeType v) { return name_of(v, kDeepfakeNames); }
std::string_view to_string(ModelId v) { return name_of(v, kModelNames); }
std::string_view to_string(Split v) { return name_of(v, kSplitNames); }

SourceId parse_source(std::string_view s) { return parse_enum(s, kSourceNames, "source dataset"); }
AudioType parse_audio_type(std::string_view s) { return parse_enum(s, kAudioTypeNames, "audio type"); }
Label parse_label(std::string_view s) { return parse_enum(s, kLabelNames, "label"); }
DeepfakeType parse_deepfake_type(std::string_view s) {
  return parse_enum(s, kDeepfakeNames, "deepfake type");
}
ModelId parse_model(std::string_view s) { return parse_enum(s, kModelNames, "generation model"); }
Split parse_split(std::string_view s) { return parse_enum(s, kSplitNames, "split"); }

}  // namespace esdd
