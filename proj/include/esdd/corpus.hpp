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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "esdd/manifest.hpp"
#include "esdd/types.hpp"
#include "esdd/wav.hpp"

namespace esdd {

struct SourceDataset {
  SourceId id;
  std::string name;
  AudioType audio_type;
  bool eval_only;
  bool provides_captions;
  std::vector<std::string> excluded_event_labels;
};

// Fixed D1..D6 roster.
const SourceDataset& source_info(SourceId id);

struct SelectionFilter {
  double min_duration = kClipSeconds;  // seconds, inclusive
  int min_sample_rate = kTargetRate;   // Hz, inclusive
  std::set<std::string> excluded_event_labels;
};

// Default filter for a source: 4 s / 16 kHz minimums plus the source's exclusions.
SelectionFilter default_filter(SourceId id);

struct ClipMetadata {
  std::string scene;
  std::vector<std::string> events;
  std::string caption;
};

struct IngestResult {
  std::optional<Waveform> wave;  // empty when skipped
  std::string skip_reason;
  WavInfo info;
};

// Decodes a file, averages to mono and applies the selection filter. Decode
// failures and zero-length audio throw; filter rejections are reported as skips.
IngestResult ingest(const std::filesystem::path& path, const SelectionFilter& filter,
                    const ClipMetadata* meta = nullptr);

struct ResamplerParams {
  double kaiser_beta = 8.6;
  int taps = 64;  // per polyphase branch
};

std::string describe(const ResamplerParams& p);

// Band-limited rational resampling with a Kaiser-windowed sinc kernel. Output
// length is round(n * target / source). Identity when the rates match.
Waveform resample(const Waveform& w, int target_rate, const ResamplerParams& params = {});

// Consecutive non-overlapping 64,000-sample windows from sample 0; the
// remainder is dropped. Requires a 16 kHz input.
std::vector<Waveform> segment(const Waveform& w);

// Converts arbitrary audio to exactly one 4 s / 16 kHz clip (the first
// segment). Throws Error(Data) if the input is shorter than 4 s.
Waveform normalize_clip(const Waveform& w, const ResamplerParams& params = {});

struct SourceConfig {
  SourceId id = SourceId::D1;
  std::filesystem::path root;
  bool annotated = true;
  std::optional<std::filesystem::path> include_list;
  SelectionFilter filter;
};

inline constexpr const char* kAnnotationFile = "metadata.tsv";

// Reads `<root>/metadata.tsv` (file, scene, events, caption). Missing file ->
// Error(Manifest) naming it.
std::map<std::string, ClipMetadata> read_annotations(const std::filesystem::path& root);

struct Skip {
  std::string path;
  std::string reason;
};

struct BuildOptions {
  std::filesystem::path audio_dir;     // where 4 s clips are written
  std::filesystem::path manifest_dir;  // record paths are relative to this
  int jobs = 1;
  ResamplerParams resampler;
};

struct BuildResult {
  std::vector<ClipRecord> records;
  std::vector<Skip> skips;
};

std::string make_clip_id(SourceId source, const std::string& relative_path, std::size_t segment);

BuildResult build_real_manifest(const std::vector<SourceConfig>& sources, const BuildOptions& opts);

}  // namespace esdd
