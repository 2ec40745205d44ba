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

#include "esdd/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

#include "esdd/error.hpp"
#include "esdd/util.hpp"

namespace esdd {
namespace {

constexpr std::size_t kColumnCount = std::size(kManifestColumns);

std::string cell(const std::string& s) {
  if (s.empty()) return "-";
  std::string out = s;
  for (char& c : out) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

std::string uncell(const std::string& s) { return s == "-" ? std::string() : s; }

std::string format_duration(double d) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", d);
  return buf;
}

}  // namespace

std::string format_manifest(const Manifest& m) {
  std::string out;
  for (const auto& line : m.provenance) out += "# " + line + "\n";
  std::vector<std::string> header(std::begin(kManifestColumns), std::end(kManifestColumns));
  out += join(header, "\t") + "\n";
  for (const auto& r : m.records) {
    std::vector<std::string> events;
    for (const auto& e : r.events) events.push_back(e);
    std::vector<std::string> row = {
        cell(r.clip_id),
        std::string(to_string(r.source)),
        std::string(to_string(r.audio_type)),
        std::string(to_string(r.label)),
        std::string(to_string(r.deepfake_type)),
        std::string(to_string(r.generation_model)),
        std::string(to_string(r.split)),
        cell(r.parent_clip_id.value_or("")),
        cell(r.path),
        std::to_string(r.sample_rate),
        format_duration(r.duration),
        cell(r.caption),
        cell(r.scene),
        cell(join(events, ";")),
    };
    out += join(row, "\t") + "\n";
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  write_text_file(path, format_manifest(m));
}

Manifest read_manifest(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  Manifest m;
  bool have_header = false;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string line = raw;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header && line[0] == '#') {
      m.provenance.push_back(trim(std::string_view(line).substr(1)));
      continue;
    }
    auto where = [&] { return path.string() + ":" + std::to_string(line_no); };
    auto fields = split(line, '\t');
    if (!have_header) {
      std::vector<std::string> expected(std::begin(kManifestColumns), std::end(kManifestColumns));
      if (fields != expected) fail(ErrorKind::Manifest, where() + ": unexpected header");
      have_header = true;
      continue;
    }
    if (fields.size() != kColumnCount) {
      fail(ErrorKind::Manifest, where() + ": expected " + std::to_string(kColumnCount) +
                                    " columns, got " + std::to_string(fields.size()));
    }
    try {
      ClipRecord r;
      r.clip_id = uncell(fields[0]);
      r.source = parse_source(fields[1]);
      r.audio_type = parse_audio_type(fields[2]);
      r.label = parse_label(fields[3]);
      r.deepfake_type = parse_deepfake_type(fields[4]);
      r.generation_model = parse_model(fields[5]);
      r.split = parse_split(fields[6]);
      if (fields[7] != "-") r.parent_clip_id = fields[7];
      r.path = uncell(fields[8]);
      r.sample_rate = std::stoi(fields[9]);
      r.duration = std::stod(fields[10]);
      r.caption = uncell(fields[11]);
      r.scene = uncell(fields[12]);
      if (fields[13] != "-") r.events = split(fields[13], ';');
      if (r.clip_id.empty()) fail(ErrorKind::Manifest, "empty clip_id");
      m.records.push_back(std::move(r));
    } catch (const Error& e) {
      fail(ErrorKind::Manifest, where() + ": " + e.what());
    } catch (const std::exception& e) {
      fail(ErrorKind::Manifest, where() + ": bad numeric field (" + e.what() + ")");
    }
  }
  if (!have_header) fail(ErrorKind::Manifest, path.string() + ": missing header line");
  return m;
}

std::filesystem::path resolve_clip_path(const std::filesystem::path& manifest_dir,
                                        const ClipRecord& r) {
  std::filesystem::path p(r.path);
  return p.is_absolute() ? p : manifest_dir / p;
}

std::vector<std::string> check_manifest(const std::vector<ClipRecord>& records) {
  std::vector<std::string> problems;
  std::unordered_map<std::string, const ClipRecord*> by_id;
  for (const auto& r : records) {
    if (!by_id.emplace(r.clip_id, &r).second) problems.push_back("duplicate clip_id " + r.clip_id);
  }
  for (const auto& r : records) {
    const bool real = r.label == Label::Real;
    const bool none_type = r.deepfake_type == DeepfakeType::None;
    const bool none_model = r.generation_model == ModelId::None;
    const bool no_parent = !r.parent_clip_id.has_value();
    if (real != none_type || real != none_model || real != no_parent) {
      problems.push_back(r.clip_id + ": label/deepfake_type/generation_model/parent inconsistent");
      continue;
    }
    if (real) continue;
    auto it = by_id.find(*r.parent_clip_id);
    if (it == by_id.end()) {
      problems.push_back(r.clip_id + ": parent " + *r.parent_clip_id + " not in manifest");
      continue;
    }
    const ClipRecord& parent = *it->second;
    if (parent.label != Label::Real) problems.push_back(r.clip_id + ": parent is not real");
    if (parent.source != r.source || parent.audio_type != r.audio_type) {
      problems.push_back(r.clip_id + ": source/audio_type differs from parent");
    }
  }
  return problems;
}

void sort_by_clip_id(std::vector<ClipRecord>& records) {
  std::sort(records.begin(), records.end(),
            [](const ClipRecord& a, const ClipRecord& b) { return a.clip_id < b.clip_id; });
}

}  // namespace esdd
