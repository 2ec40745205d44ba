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

#include "esdd/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "esdd/error.hpp"
#include "esdd/util.hpp"

namespace esdd {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

struct Parsed {
  WavInfo info;
  std::uint16_t format = 0;
  std::size_t data_offset = 0;
  std::size_t data_size = 0;
};

Parsed parse_header(const std::vector<unsigned char>& buf, const std::string& name) {
  auto bad = [&](const std::string& why) -> Parsed {
    fail(ErrorKind::Decode, name + ": " + why);
  };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    return bad("not a RIFF/WAVE file");
  }
  Parsed p;
  bool have_fmt = false, have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    std::uint32_t size = le32(chunk + 4);
    std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > buf.size()) return bad("truncated fmt chunk");
      p.format = le16(buf.data() + body);
      p.info.channels = le16(buf.data() + body + 2);
      p.info.sample_rate = static_cast<int>(le32(buf.data() + body + 4));
      p.info.bits_per_sample = le16(buf.data() + body + 14);
      if (p.format == kFormatExtensible) {
        if (size < 40) return bad("truncated extensible fmt chunk");
        p.format = le16(buf.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      p.data_offset = body;
      p.data_size = std::min<std::size_t>(size, buf.size() - body);
      have_data = true;
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) return bad("missing fmt chunk");
  if (!have_data) return bad("missing data chunk");
  if (p.info.channels <= 0 || p.info.sample_rate <= 0) return bad("invalid channel count or rate");
  const int bits = p.info.bits_per_sample;
  const bool int_ok = p.format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool float_ok = p.format == kFormatFloat && (bits == 32 || bits == 64);
  if (!int_ok && !float_ok) {
    return bad("unsupported sample format " + std::to_string(p.format) + "/" +
               std::to_string(bits) + " bit");
  }
  const std::size_t frame_bytes = static_cast<std::size_t>(bits / 8) * p.info.channels;
  p.info.frames = p.data_size / frame_bytes;
  return p;
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Decode, path.string() + ": cannot open");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

float decode_sample(const unsigned char* p, std::uint16_t format, int bits) {
  if (format == kFormatFloat) {
    if (bits == 32) {
      float f;
      std::uint32_t u = le32(p);
      std::memcpy(&f, &u, 4);
      return f;
    }
    std::uint64_t u = static_cast<std::uint64_t>(le32(p)) |
                      (static_cast<std::uint64_t>(le32(p + 4)) << 32);
    double d;
    std::memcpy(&d, &u, 8);
    return static_cast<float>(d);
  }
  switch (bits) {
    case 8: return (static_cast<int>(p[0]) - 128) / 128.0f;
    case 16: return static_cast<std::int16_t>(le16(p)) / 32768.0f;
    case 24: {
      std::int32_t v = static_cast<std::int32_t>((p[0] << 8) | (p[1] << 16) | (p[2] << 24)) >> 8;
      return static_cast<float>(v / 8388608.0);
    }
    default:
      return static_cast<float>(static_cast<std::int32_t>(le32(p)) / 2147483648.0);
  }
}

}  // namespace

WavInfo probe_wav(const std::filesystem::path& path) {
  return parse_header(slurp(path), path.string()).info;
}

Waveform read_wav(const std::filesystem::path& path, WavInfo* info) {
  const auto buf = slurp(path);
  const Parsed p = parse_header(buf, path.string());
  if (info) *info = p.info;
  if (p.info.frames == 0) fail(ErrorKind::EmptyInput, path.string() + ": zero-length audio");
  const int channels = p.info.channels;
  const int bytes = p.info.bits_per_sample / 8;
  Waveform w;
  w.sample_rate = p.info.sample_rate;
  w.samples.resize(p.info.frames);
  const unsigned char* data = buf.data() + p.data_offset;
  for (std::size_t i = 0; i < p.info.frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      acc += decode_sample(data + (i * channels + c) * bytes, p.format, p.info.bits_per_sample);
    }
    float v = static_cast<float>(acc / channels);
    if (!std::isfinite(v)) fail(ErrorKind::Decode, path.string() + ": non-finite sample");
    w.samples[i] = v;
  }
  return w;
}

void write_wav_pcm16(const std::filesystem::path& path, const Waveform& w) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  auto put16 = [&](std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
  };
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  out += "RIFF";
  put32(36 + data_bytes);
  out += "WAVEfmt ";
  put32(16);
  put16(kFormatPcm);
  put16(1);
  put32(static_cast<std::uint32_t>(w.sample_rate));
  put32(static_cast<std::uint32_t>(w.sample_rate) * 2);
  put16(2);
  put16(16);
  out += "data";
  put32(data_bytes);
  for (float s : w.samples) {
    float c = std::clamp(s, -1.0f, 1.0f);
    long q = std::lround(c * 32767.0f);
    put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  write_text_file(path, out);
}

}  // namespace esdd
