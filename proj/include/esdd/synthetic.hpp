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

#include <cstdint>
#include <filesystem>
#include <string>

#include "esdd/wav.hpp"

namespace esdd {

// Synthetic stand-ins for the bundled fixture: harmonic tones play the role
// of recorded audio, band-limited noise the role of generated audio.
Waveform synth_tone(std::uint64_t seed, double seconds, int sample_rate);
Waveform synth_noise(std::uint64_t seed, double seconds, int sample_rate);

struct SyntheticOptions {
  std::size_t n_real = 100;
  double seconds = 4.0;
  int sample_rate = 22050;
  std::uint64_t seed = 1234;
};

// Writes a D1-shaped source directory: `n_real` tone files plus metadata.tsv.
void write_synthetic_source(const std::filesystem::path& root, const SyntheticOptions& opts);

}  // namespace esdd
