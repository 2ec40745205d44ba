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

#include "esdd/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_set>

#include "esdd/error.hpp"
#include "esdd/util.hpp"

namespace esdd {
namespace {

const std::vector<SourceDataset>& roster() {
  static const std::vector<SourceDataset> table = {
      {SourceId::D1, "UrbanSound8K", AudioType::Monophonic, false, false, {}},
      {SourceId::D2, "DCASE 2023 Task7 Dev", AudioType::Monophonic, true, false,
       {"DogBark", "GunShot"}},
      {SourceId::D3, "TAU UAS 2019 Open Dev", AudioType::Polyphonic, false, false, {}},
      {SourceId::D4, "TUT SED 2016", AudioType::Polyphonic, false, false, {}},
      {SourceId::D5, "TUT SED 2017", AudioType::Polyphonic, false, false, {}},
      {SourceId::D6, "Clotho", AudioType::Polyphonic, true, true, {}},
  };
  return table;
}

// Zeroth-order modified Bessel function of the first kind (power series).
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

bool is_wav(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".wav";
}

std::vector<std::string> list_audio(const std::filesystem::path& root) {
  std::vector<std::string> rel;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && is_wav(entry.path())) {
      rel.push_back(std::filesystem::relative(entry.path(), root).generic_string());
    }
  }
  std::sort(rel.begin(), rel.end());
  return rel;
}

}  // namespace

const SourceDataset& source_info(SourceId id) {
  return roster().at(static_cast<std::size_t>(id) - 1);
}

SelectionFilter default_filter(SourceId id) {
  SelectionFilter f;
  for (const auto& label : source_info(id).excluded_event_labels) f.excluded_event_labels.insert(label);
  return f;
}

IngestResult ingest(const std::filesystem::path& path, const SelectionFilter& filter,
                    const ClipMetadata* meta) {
  IngestResult result;
  Waveform w = read_wav(path, &result.info);
  if (meta) {
    for (const auto& e : meta->events) {
      if (filter.excluded_event_labels.count(e)) {
        result.skip_reason = "excluded event label " + e;
        return result;
      }
    }
  }
  if (result.info.sample_rate < filter.min_sample_rate) {
    result.skip_reason = "sample rate " + std::to_string(result.info.sample_rate) + " Hz below " +
                         std::to_string(filter.min_sample_rate);
    return result;
  }
  // Compare in samples to avoid rounding a nominal 4 s file below the limit.
  const double min_frames = filter.min_duration * result.info.sample_rate;
  if (static_cast<double>(w.samples.size()) + 1e-6 < min_frames) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "duration %.3f s below %.3f s", w.duration(),
                  filter.min_duration);
    result.skip_reason = buf;
    return result;
  }
  result.wave = std::move(w);
  return result;
}

std::string describe(const ResamplerParams& p) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "resampler=kaiser-sinc beta=%.2f taps=%d", p.kaiser_beta, p.taps);
  return buf;
}

Waveform resample(const Waveform& w, int target_rate, const ResamplerParams& params) {
  if (w.sample_rate <= 0 || target_rate <= 0) {
    fail(ErrorKind::Argument, "resample: sample rates must be positive");
  }
  for (float s : w.samples) {
    if (!std::isfinite(s)) fail(ErrorKind::Numeric, "resample: non-finite input sample");
  }
  if (w.sample_rate == target_rate) return w;

  const long g = std::gcd(static_cast<long>(w.sample_rate), static_cast<long>(target_rate));
  const long up = target_rate / g;    // polyphase branches
  const long down = w.sample_rate / g;
  const int taps = params.taps;
  const int half = taps / 2;
  const double cutoff = std::min(1.0, static_cast<double>(target_rate) / w.sample_rate);
  const double i0_beta = bessel_i0(params.kaiser_beta);

  // table[p * taps + j] weights input sample (base - half + 1 + j) for output
  // phase p / up, where base = floor(n * down / up).
  std::vector<float> table(static_cast<std::size_t>(up) * taps);
  for (long p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / up;
    double sum = 0.0;
    std::vector<double> h(taps);
    for (int j = 0; j < taps; ++j) {
      const double x = frac + (half - 1 - j);  // distance from output time to tap
      const double arg = M_PI * cutoff * x;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      const double r = x / half;
      const double win = std::abs(r) >= 1.0 ? 0.0
                                            : bessel_i0(params.kaiser_beta * std::sqrt(1.0 - r * r)) / i0_beta;
      h[j] = cutoff * sinc * win;
      sum += h[j];
    }
    for (int j = 0; j < taps; ++j) table[p * taps + j] = static_cast<float>(h[j] / sum);
  }

  const std::size_t n_in = w.samples.size();
  const std::size_t n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_in) * target_rate / w.sample_rate));
  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (std::size_t n = 0; n < n_out; ++n) {
    const long long pos = static_cast<long long>(n) * down;
    const long long base = pos / up;
    const long phase = static_cast<long>(pos % up);
    const float* h = table.data() + phase * taps;
    double acc = 0.0;
    const long long first = base - half + 1;
    for (int j = 0; j < taps; ++j) {
      const long long k = first + j;
      if (k < 0 || k >= static_cast<long long>(n_in)) continue;
      acc += static_cast<double>(h[j]) * w.samples[static_cast<std::size_t>(k)];
    }
    out.samples[n] = static_cast<float>(acc);
  }
  return out;
}

std::vector<Waveform> segment(const Waveform& w) {
  if (w.sample_rate != kTargetRate) {
    fail(ErrorKind::Argument, "segment: expected 16000 Hz input, got " + std::to_string(w.sample_rate));
  }
  std::vector<Waveform> clips;
  for (std::size_t start = 0; start + kClipSamples <= w.samples.size(); start += kClipSamples) {
    Waveform c;
    c.sample_rate = kTargetRate;
    c.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     w.samples.begin() + static_cast<std::ptrdiff_t>(start + kClipSamples));
    clips.push_back(std::move(c));
  }
  return clips;
}

Waveform normalize_clip(const Waveform& w, const ResamplerParams& params) {
  auto clips = segment(resample(w, kTargetRate, params));
  if (clips.empty()) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "audio of %.3f s is shorter than one 4 s clip", w.duration());
    fail(ErrorKind::Data, buf);
  }
  return std::move(clips.front());
}

std::map<std::string, ClipMetadata> read_annotations(const std::filesystem::path& root) {
  const auto path = root / kAnnotationFile;
  if (!std::filesystem::exists(path)) {
    fail(ErrorKind::Manifest, "missing annotation file " + path.string());
  }
  std::map<std::string, ClipMetadata> out;
  bool header = true;
  std::size_t line_no = 0;
  for (auto line : split(read_text_file(path), '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    auto f = split(line, '\t');
    if (f.size() != 4) {
      fail(ErrorKind::Manifest, path.string() + ":" + std::to_string(line_no) +
                                    ": expected 4 columns (file, scene, events, caption)");
    }
    ClipMetadata m;
    if (f[1] != "-") m.scene = f[1];
    if (f[2] != "-" && !f[2].empty()) m.events = split(f[2], ';');
    if (f[3] != "-") m.caption = f[3];
    out[f[0]] = std::move(m);
  }
  return out;
}

std::string make_clip_id(SourceId source, const std::string& relative_path, std::size_t segment) {
  std::string stem = std::filesystem::path(relative_path).replace_extension().generic_string();
  for (char& c : stem) {
    const auto u = static_cast<unsigned char>(c);
    if (c == '/') {
      c = '-';
    } else if (!std::isalnum(u) && c != '-' && c != '_' && c != '.') {
      c = '_';
    }
  }
  char idx[16];
  std::snprintf(idx, sizeof(idx), "%03zu", segment);
  return std::string(to_string(source)) + "_" + stem + "_" + idx;
}

BuildResult build_real_manifest(const std::vector<SourceConfig>& sources, const BuildOptions& opts) {
  struct FileTask {
    const SourceConfig* source;
    std::string rel;
    const ClipMetadata* meta;
  };
  struct FileOutcome {
    std::vector<ClipRecord> records;
    std::optional<Skip> skip;
  };

  std::vector<std::map<std::string, ClipMetadata>> annotations(sources.size());
  std::vector<FileTask> tasks;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const SourceConfig& src = sources[s];
    if (!std::filesystem::is_directory(src.root)) {
      fail(ErrorKind::Manifest, "source root " + src.root.string() + " is not a directory");
    }
    if (src.annotated) annotations[s] = read_annotations(src.root);
    std::vector<std::string> files = list_audio(src.root);
    if (src.include_list) {
      std::set<std::string> include;
      for (const auto& l : split(read_text_file(*src.include_list), '\n')) {
        std::string t = trim(l);
        if (!t.empty() && t[0] != '#') include.insert(t);
      }
      std::erase_if(files, [&](const std::string& f) { return !include.count(f); });
    }
    if (files.empty()) log_warn("source " + std::string(to_string(src.id)) + " at " +
                                src.root.string() + " has no audio files");
    for (auto& f : files) {
      const ClipMetadata* meta = nullptr;
      if (src.annotated) {
        auto it = annotations[s].find(f);
        if (it != annotations[s].end()) meta = &it->second;
      }
      tasks.push_back({&src, std::move(f), meta});
    }
  }

  std::vector<FileOutcome> outcomes(tasks.size());
  parallel_for(tasks.size(), opts.jobs, [&](std::size_t i) {
    const FileTask& t = tasks[i];
    FileOutcome& out = outcomes[i];
    if (t.source->annotated && !t.meta) {
      out.skip = Skip{t.rel, "no annotation entry"};
      return;
    }
    IngestResult ing = ingest(t.source->root / t.rel, t.source->filter, t.meta);
    if (!ing.wave) {
      out.skip = Skip{t.rel, ing.skip_reason};
      return;
    }
    auto clips = segment(resample(*ing.wave, kTargetRate, opts.resampler));
    if (clips.empty()) {
      out.skip = Skip{t.rel, "shorter than one 4 s clip after resampling"};
      return;
    }
    const SourceDataset& info = source_info(t.source->id);
    for (std::size_t k = 0; k < clips.size(); ++k) {
      ClipRecord r;
      r.clip_id = make_clip_id(t.source->id, t.rel, k);
      r.source = t.source->id;
      r.audio_type = info.audio_type;
      r.label = Label::Real;
      r.split = Split::Unassigned;
      const auto wav = opts.audio_dir / (r.clip_id + ".wav");
      write_wav_pcm16(wav, clips[k]);
      r.path = std::filesystem::relative(wav, opts.manifest_dir).generic_string();
      r.sample_rate = kTargetRate;
      r.duration = kClipSeconds;
      if (t.meta) {
        r.scene = t.meta->scene;
        r.events = t.meta->events;
        if (info.provides_captions) r.caption = t.meta->caption;
      }
      out.records.push_back(std::move(r));
    }
  });

  BuildResult result;
  std::unordered_set<std::string> seen;
  for (auto& o : outcomes) {
    if (o.skip) result.skips.push_back(*o.skip);
    for (auto& r : o.records) {
      if (!seen.insert(r.clip_id).second) {
        fail(ErrorKind::Manifest, "clip_id collision: " + r.clip_id);
      }
      result.records.push_back(std::move(r));
    }
  }
  return result;
}

}  // namespace esdd
