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

#include "esdd/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>

#include "esdd/error.hpp"
#include "esdd/util.hpp"

namespace esdd {
namespace {

// FFTW's planner is not thread-safe; execution on new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32(std::string& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  put_u32(out, u);
}

std::string encode_envelope(const char* magic, const std::string& id, std::size_t rows,
                            std::size_t cols, const std::vector<float>& values) {
  std::string out(magic, 8);
  put_u32(out, kDtypeF32Le);
  put_u32(out, static_cast<std::uint32_t>(rows));
  put_u32(out, static_cast<std::uint32_t>(cols));
  put_u32(out, static_cast<std::uint32_t>(id.size()));
  out += id;
  out.reserve(out.size() + values.size() * 4);
  for (float v : values) put_f32(out, v);
  return out;
}

struct Envelope {
  std::string id;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;
};

Envelope decode_envelope(const std::filesystem::path& path, const char* magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  const auto file_size = std::filesystem::file_size(path);
  unsigned char head[24];
  if (file_size < sizeof(head) || !in.read(reinterpret_cast<char*>(head), sizeof(head))) {
    fail(ErrorKind::Format, path.string() + ": truncated header");
  }
  if (std::memcmp(head, magic, 8) != 0) {
    fail(ErrorKind::Format, path.string() + ": bad magic, expected " + std::string(magic, 8));
  }
  if (get_u32(head + 8) != kDtypeF32Le) fail(ErrorKind::Format, path.string() + ": unsupported dtype");
  Envelope env;
  env.rows = get_u32(head + 12);
  env.cols = get_u32(head + 16);
  const std::uint32_t id_len = get_u32(head + 20);
  if (env.rows == 0 || env.cols == 0) fail(ErrorKind::Format, path.string() + ": empty matrix shape");
  if (sizeof(head) + id_len > file_size) fail(ErrorKind::Length, path.string() + ": truncated front-end id");
  const std::uint64_t expected = static_cast<std::uint64_t>(env.rows) * env.cols * 4;
  const std::uint64_t actual = file_size - sizeof(head) - id_len;
  if (expected != actual) {
    fail(ErrorKind::Length, path.string() + ": payload length mismatch, expected " +
                                std::to_string(expected) + " bytes, got " + std::to_string(actual));
  }
  env.id.resize(id_len);
  in.read(env.id.data(), id_len);
  std::vector<unsigned char> raw(expected);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(expected));
  if (!in) fail(ErrorKind::Length, path.string() + ": short read");
  env.values.resize(env.rows * env.cols);
  for (std::size_t i = 0; i < env.values.size(); ++i) {
    std::uint32_t u = get_u32(raw.data() + 4 * i);
    std::memcpy(&env.values[i], &u, 4);
  }
  return env;
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

LogMel::LogMel(const LogMelConfig& cfg) : cfg_(cfg) {
  if (cfg_.win_length <= 0 || cfg_.hop_length <= 0 || cfg_.n_fft < cfg_.win_length || cfg_.n_mels <= 0) {
    fail(ErrorKind::Config, "invalid log-mel configuration");
  }
  window_.resize(cfg_.win_length);
  for (int n = 0; n < cfg_.win_length; ++n) {
    window_[n] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * M_PI * n / (cfg_.win_length - 1)));
  }
  const int bins = cfg_.n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(cfg_.f_min), mel_hi = hz_to_mel(cfg_.f_max);
  std::vector<double> edges(cfg_.n_mels + 2);
  for (int i = 0; i < cfg_.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg_.n_mels + 1));
  }
  filters_.assign(static_cast<std::size_t>(cfg_.n_mels) * bins, 0.0f);
  centers_.resize(cfg_.n_mels);
  for (int m = 0; m < cfg_.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    centers_[m] = mid;
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg_.sample_rate / cfg_.n_fft;
      double w = 0.0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      filters_[static_cast<std::size_t>(m) * bins + k] = static_cast<float>(w);
    }
  }
  std::lock_guard lock(planner_mutex());
  float* in = fftwf_alloc_real(cfg_.n_fft);
  fftwf_complex* out = fftwf_alloc_complex(bins);
  plan_ = fftwf_plan_dft_r2c_1d(cfg_.n_fft, in, out, FFTW_ESTIMATE);
  fftwf_free(in);
  fftwf_free(out);
}

LogMel::~LogMel() {
  std::lock_guard lock(planner_mutex());
  if (plan_) fftwf_destroy_plan(static_cast<fftwf_plan>(plan_));
}

std::string LogMel::front_end_id() const { return "logmel" + std::to_string(cfg_.n_mels); }

FeatureMatrix LogMel::compute(const Waveform& w) const {
  if (w.sample_rate != cfg_.sample_rate) {
    fail(ErrorKind::Feature, "log-mel expects " + std::to_string(cfg_.sample_rate) + " Hz input, got " +
                                 std::to_string(w.sample_rate));
  }
  const std::size_t n = w.samples.size();
  const std::size_t win = static_cast<std::size_t>(cfg_.win_length);
  if (n < win) {
    fail(ErrorKind::Feature, "clip of " + std::to_string(n) + " samples is shorter than one " +
                                 std::to_string(win) + "-sample window");
  }
  const std::size_t hop = static_cast<std::size_t>(cfg_.hop_length);
  const int bins = cfg_.n_fft / 2 + 1;
  FeatureMatrix m;
  m.frames = (n - win) / hop + 1;
  m.dims = static_cast<std::size_t>(cfg_.n_mels);
  m.frame_hop = static_cast<double>(cfg_.hop_length) / cfg_.sample_rate;
  m.front_end_id = front_end_id();
  m.values.resize(m.frames * m.dims);

  float* frame = fftwf_alloc_real(cfg_.n_fft);
  fftwf_complex* spec = fftwf_alloc_complex(bins);
  std::vector<float> power(bins);
  for (std::size_t t = 0; t < m.frames; ++t) {
    const float* src = w.samples.data() + t * hop;
    for (std::size_t i = 0; i < win; ++i) frame[i] = src[i] * window_[i];
    for (int i = static_cast<int>(win); i < cfg_.n_fft; ++i) frame[i] = 0.0f;
    fftwf_execute_dft_r2c(static_cast<fftwf_plan>(plan_), frame, spec);
    for (int k = 0; k < bins; ++k) power[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    for (std::size_t b = 0; b < m.dims; ++b) {
      const float* f = filters_.data() + b * bins;
      double e = 0.0;
      for (int k = 0; k < bins; ++k) e += static_cast<double>(f[k]) * power[k];
      m.values[t * m.dims + b] = static_cast<float>(std::log(e + cfg_.floor));
    }
  }
  fftwf_free(frame);
  fftwf_free(spec);
  return m;
}

void write_embedding(const std::filesystem::path& path, const FeatureMatrix& m) {
  if (m.frames == 0 || m.dims == 0 || m.values.size() != m.frames * m.dims) {
    fail(ErrorKind::Shape, "write_embedding: inconsistent matrix shape");
  }
  write_text_file(path, encode_envelope(kEmbeddingMagic, m.front_end_id, m.frames, m.dims, m.values));
}

FeatureMatrix read_embedding(const std::filesystem::path& path) {
  Envelope env = decode_envelope(path, kEmbeddingMagic);
  FeatureMatrix m;
  m.frames = env.rows;
  m.dims = env.cols;
  m.values = std::move(env.values);
  m.front_end_id = std::move(env.id);
  for (float v : m.values) {
    if (!std::isfinite(v)) fail(ErrorKind::Data, path.string() + ": non-finite embedding value");
  }
  return m;
}

std::filesystem::path embedding_path(const std::filesystem::path& root, const std::string& clip_id) {
  return root / (clip_id + ".emb");
}

NormStats compute_norm_stats(std::span<const FeatureMatrix> set) {
  if (set.empty()) fail(ErrorKind::Argument, "normalization statistics need at least one matrix");
  const std::size_t d = set.front().dims;
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  std::size_t count = 0;
  for (const auto& m : set) {
    if (m.dims != d) fail(ErrorKind::Shape, "feature dimension differs across the set");
    for (std::size_t t = 0; t < m.frames; ++t) {
      for (std::size_t j = 0; j < d; ++j) {
        const double v = m.at(t, j);
        sum[j] += v;
        sq[j] += v * v;
      }
    }
    count += m.frames;
  }
  NormStats s;
  s.front_end_id = set.front().front_end_id;
  s.mean.resize(d);
  s.stddev.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double mean = sum[j] / count;
    const double var = std::max(0.0, sq[j] / count - mean * mean);
    s.mean[j] = static_cast<float>(mean);
    s.stddev[j] = static_cast<float>(std::max(std::sqrt(var), 1e-5));
  }
  return s;
}

void apply_norm(FeatureMatrix& m, const NormStats& stats) {
  if (stats.mean.size() != m.dims) {
    fail(ErrorKind::Shape, "normalization stats have " + std::to_string(stats.mean.size()) +
                               " dims, features have " + std::to_string(m.dims));
  }
  for (std::size_t t = 0; t < m.frames; ++t) {
    for (std::size_t j = 0; j < m.dims; ++j) {
      m.at(t, j) = (m.at(t, j) - stats.mean[j]) / stats.stddev[j];
    }
  }
}

void write_norm_stats(const std::filesystem::path& path, const NormStats& stats) {
  std::vector<float> values(stats.mean);
  values.insert(values.end(), stats.stddev.begin(), stats.stddev.end());
  write_text_file(path, encode_envelope(kNormStatsMagic, stats.front_end_id, 2, stats.mean.size(), values));
}

NormStats read_norm_stats(const std::filesystem::path& path) {
  Envelope env = decode_envelope(path, kNormStatsMagic);
  if (env.rows != 2) fail(ErrorKind::Format, path.string() + ": normalization stats need 2 rows");
  NormStats s;
  s.front_end_id = env.id;
  s.mean.assign(env.values.begin(), env.values.begin() + static_cast<std::ptrdiff_t>(env.cols));
  s.stddev.assign(env.values.begin() + static_cast<std::ptrdiff_t>(env.cols), env.values.end());
  return s;
}

FrontEnd::FrontEnd(FrontEndConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.kind == FrontEndKind::LogMel) logmel_ = std::make_unique<LogMel>(cfg_.logmel);
}

FeatureMatrix FrontEnd::load(const ClipRecord& r, const std::filesystem::path& manifest_dir) const {
  if (cfg_.kind == FrontEndKind::Embedding) {
    const auto p = embedding_path(cfg_.embedding_root, r.clip_id);
    if (!std::filesystem::exists(p)) fail(ErrorKind::Data, "missing embedding file " + p.string());
    return read_embedding(p);
  }
  const auto p = resolve_clip_path(manifest_dir, r);
  if (!std::filesystem::exists(p)) fail(ErrorKind::Data, "missing audio file " + p.string());
  return logmel_->compute(read_wav(p));
}

}  // namespace esdd
