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

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "esdd/manifest.hpp"
#include "esdd/wav.hpp"

namespace esdd {

// Row-major T x D matrix of frame features.
struct FeatureMatrix {
  std::vector<float> values;
  std::size_t frames = 0;
  std::size_t dims = 0;
  double frame_hop = 0.0;  // seconds
  std::string front_end_id;

  float at(std::size_t t, std::size_t d) const { return values[t * dims + d]; }
  float& at(std::size_t t, std::size_t d) { return values[t * dims + d]; }
};

struct LogMelConfig {
  int sample_rate = 16000;
  int win_length = 400;  // 25 ms
  int hop_length = 160;  // 10 ms
  int n_fft = 512;
  int n_mels = 64;
  double f_min = 0.0;
  double f_max = 8000.0;
  double floor = 1e-10;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Hann-windowed power spectrum through an HTK-scale triangular filterbank,
// then ln(energy + floor). T = floor((N - win) / hop) + 1.
class LogMel {
 public:
  explicit LogMel(const LogMelConfig& cfg = {});
  ~LogMel();
  LogMel(const LogMel&) = delete;
  LogMel& operator=(const LogMel&) = delete;

  // Throws Error(Feature) for clips shorter than one window or a wrong rate.
  FeatureMatrix compute(const Waveform& w) const;

  const LogMelConfig& config() const { return cfg_; }
  // Peak frequency of each triangular filter.
  const std::vector<double>& center_frequencies() const { return centers_; }
  std::string front_end_id() const;

 private:
  LogMelConfig cfg_;
  std::vector<double> centers_;
  std::vector<float> window_;
  std::vector<float> filters_;  // n_mels x (n_fft / 2 + 1)
  void* plan_ = nullptr;
};

inline constexpr char kEmbeddingMagic[9] = "ESDDEMB1";
inline constexpr char kNormStatsMagic[9] = "ESDDNRM1";
inline constexpr std::uint32_t kDtypeF32Le = 0;

// Binary envelope: 8-byte magic, then little-endian u32 dtype, u32 T, u32 D,
// u32 id length, id bytes (UTF-8), and T*D f32le values row-major.
void write_embedding(const std::filesystem::path& path, const FeatureMatrix& m);
// Bad magic -> Error(Format); header/payload mismatch -> Error(Length), both
// raised before the payload is read.
FeatureMatrix read_embedding(const std::filesystem::path& path);

std::filesystem::path embedding_path(const std::filesystem::path& root, const std::string& clip_id);

struct NormStats {
  std::string front_end_id;
  std::vector<float> mean;
  std::vector<float> stddev;
};

NormStats compute_norm_stats(std::span<const FeatureMatrix> set);
void apply_norm(FeatureMatrix& m, const NormStats& stats);
void write_norm_stats(const std::filesystem::path& path, const NormStats& stats);
NormStats read_norm_stats(const std::filesystem::path& path);

enum class FrontEndKind { LogMel, Embedding };

struct FrontEndConfig {
  FrontEndKind kind = FrontEndKind::LogMel;
  std::filesystem::path embedding_root;
  LogMelConfig logmel;
};

// Loads the feature matrix for a clip through the configured front-end.
class FrontEnd {
 public:
  explicit FrontEnd(FrontEndConfig cfg);
  FeatureMatrix load(const ClipRecord& r, const std::filesystem::path& manifest_dir) const;
  const FrontEndConfig& config() const { return cfg_; }
  bool pretrained() const { return cfg_.kind == FrontEndKind::Embedding; }

 private:
  FrontEndConfig cfg_;
  std::unique_ptr<LogMel> logmel_;
};

}  // namespace esdd
