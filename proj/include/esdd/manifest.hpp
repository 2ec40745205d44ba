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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "esdd/types.hpp"

namespace esdd {

inline constexpr int kTargetRate = 16000;
inline constexpr std::size_t kClipSamples = 64000;
inline constexpr double kClipSeconds = 4.0;

struct ClipRecord {
  std::string clip_id;
  SourceId source = SourceId::D1;
  AudioType audio_type = AudioType::Monophonic;
  Label label = Label::Real;
  DeepfakeType deepfake_type = DeepfakeType::None;
  ModelId generation_model = ModelId::None;
  Split split = Split::Unassigned;
  std::optional<std::string> parent_clip_id;
  std::string path;  // relative paths resolve against the manifest directory
  int sample_rate = kTargetRate;
  double duration = kClipSeconds;
  std::string caption;  // empty == absent
  std::string scene;    // empty == absent
  std::vector<std::string> events;

  bool operator==(const ClipRecord&) const = default;
};

struct Manifest {
  std::vector<ClipRecord> records;
  // Lines after the leading '#', in file order. Not part of the column data.
  std::vector<std::string> provenance;
};

inline constexpr const char* kManifestColumns[] = {
    "clip_id", "source", "audio_type", "label", "deepfake_type", "generation_model", "split",
    "parent_clip_id", "path", "sample_rate", "duration", "caption", "scene", "events"};

// Throws Error(Manifest) naming the line on malformed rows.
Manifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const Manifest& m);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

std::filesystem::path resolve_clip_path(const std::filesystem::path& manifest_dir,
                                        const ClipRecord& r);

// Structural invariants: unique ids, the real/none/none/no-parent equivalence,
// and that every fake points at a real parent of the same source and audio type.
std::vector<std::string> check_manifest(const std::vector<ClipRecord>& records);

// Orders records by clip_id; the canonical on-disk order.
void sort_by_clip_id(std::vector<ClipRecord>& records);

}  // namespace esdd
