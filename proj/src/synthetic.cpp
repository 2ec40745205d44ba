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

#include "esdd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "esdd/hash.hpp"
#include "esdd/util.hpp"

namespace esdd {

namespace {
const char* const kToneLabels[] = {"siren", "car_horn", "engine_idling", "drilling", "street_music"};
}

Waveform synth_tone(std::uint64_t seed, double seconds, int sample_rate) {
  Rng rng(seed);
  const double f0 = 200.0 + 1800.0 * rng.uniform();
  const double amp = 0.2 + 0.4 * rng.uniform();
  const int harmonics = 1 + static_cast<int>(rng.below(3));
  const double vibrato = 2.0 + 4.0 * rng.uniform();
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(static_cast<std::size_t>(std::llround(seconds * sample_rate)));
  for (std::size_t n = 0; n < w.samples.size(); ++n) {
    const double t = static_cast<double>(n) / sample_rate;
    const double phase = 2.0 * M_PI * f0 * t + 0.5 * std::sin(2.0 * M_PI * vibrato * t);
    double v = 0.0;
    for (int h = 1; h <= harmonics; ++h) v += std::sin(h * phase) / h;
    w.samples[n] = static_cast<float>(amp * v / harmonics + 0.002 * rng.normal());
  }
  return w;
}

Waveform synth_noise(std::uint64_t seed, double seconds, int sample_rate) {
  Rng rng(seed);
  const double amp = 0.1 + 0.3 * rng.uniform();
  // Two cascaded one-pole sections: a band-limited hiss with a random cutoff.
  const double cutoff = 500.0 + 3500.0 * rng.uniform();
  const double a = std::exp(-2.0 * M_PI * cutoff / sample_rate);
  double s1 = 0.0, s2 = 0.0, prev = 0.0;
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(static_cast<std::size_t>(std::llround(seconds * sample_rate)));
  for (auto& out : w.samples) {
    const double x = rng.normal();
    s1 = (1.0 - a) * x + a * s1;
    s2 = (1.0 - a) * s1 + a * s2;
    const double hp = s2 - 0.5 * prev;
    prev = s2;
    out = static_cast<float>(std::clamp(amp * hp * 3.0, -1.0, 1.0));
  }
  return w;
}

void write_synthetic_source(const std::filesystem::path& root, const SyntheticOptions& opts) {
  std::filesystem::create_directories(root / "audio");
  std::string meta = "file\tscene\tevents\tcaption\n";
  for (std::size_t i = 0; i < opts.n_real; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "audio/tone%04zu.wav", i);
    const auto& label = kToneLabels[i % std::size(kToneLabels)];
    write_wav_pcm16(root / name, synth_tone(splitmix_seed(opts.seed, i), opts.seconds, opts.sample_rate));
    meta += std::string(name) + "\t-\t" + label + "\t-\n";
  }
  write_text_file(root / "metadata.tsv", meta);
}

}  // namespace esdd
