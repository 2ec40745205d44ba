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

#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "esdd/manifest.hpp"
#include "esdd/wav.hpp"

namespace esdd::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "esdd-test-XXXXXX").string();
    if (mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline Waveform tone(double hz, double seconds, int rate, double amp = 0.5) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * hz * static_cast<double>(i) / rate));
  return w;
}

// Direct DFT magnitude at frequency f (Hz); O(N) per probe.
inline double dft_magnitude(const std::vector<float>& x, int rate, double f) {
  std::complex<double> acc = 0.0;
  const double w = -2.0 * M_PI * f / rate;
  for (std::size_t n = 0; n < x.size(); ++n) acc += static_cast<double>(x[n]) * std::polar(1.0, w * n);
  return std::abs(acc);
}

// Frequency with the largest direct-DFT magnitude on a grid [lo, hi].
inline double dft_peak(const std::vector<float>& x, int rate, double lo, double hi, double step) {
  double best_f = lo, best = -1.0;
  for (double f = lo; f <= hi + 1e-9; f += step) {
    const double m = dft_magnitude(x, rate, f);
    if (m > best) {
      best = m;
      best_f = f;
    }
  }
  return best_f;
}

inline ClipRecord real_record(const std::string& id, SourceId src, Split split = Split::Unassigned) {
  ClipRecord r;
  r.clip_id = id;
  r.source = src;
  r.audio_type = (src == SourceId::D1 || src == SourceId::D2) ? AudioType::Monophonic : AudioType::Polyphonic;
  r.split = split;
  r.path = "audio/" + id + ".wav";
  r.caption = "A sound.";
  return r;
}

inline ClipRecord fake_record(const ClipRecord& parent, ModelId model, DeepfakeType type) {
  ClipRecord r = parent;
  r.clip_id = parent.clip_id + "__" + std::string(to_string(model)) + "__" + std::string(to_string(type));
  r.label = Label::Fake;
  r.deepfake_type = type;
  r.generation_model = model;
  r.parent_clip_id = parent.clip_id;
  r.path = "fake/" + r.clip_id + ".wav";
  r.caption.clear();
  return r;
}

}  // namespace esdd::test
