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
#include <vector>

namespace esdd {

// Mono waveform with samples nominally in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 0;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  int bits_per_sample = 0;
  std::size_t frames = 0;
};

// Reads RIFF/WAVE PCM (8/16/24/32-bit integer, 32/64-bit float, including
// WAVE_FORMAT_EXTENSIBLE). Multichannel input is averaged to mono.
// Throws Error(Decode) for malformed files and Error(EmptyInput) for zero frames.
Waveform read_wav(const std::filesystem::path& path, WavInfo* info = nullptr);

// Header-only probe; same error contract as read_wav minus EmptyInput.
WavInfo probe_wav(const std::filesystem::path& path);

// 16-bit PCM mono with round-to-nearest and clipping to [-1, 1].
void write_wav_pcm16(const std::filesystem::path& path, const Waveform& w);

}  // namespace esdd
