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

#include "esdd/splits.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "esdd/corpus.hpp"
#include "esdd/error.hpp"
#include "esdd/hash.hpp"
#include "esdd/util.hpp"

namespace esdd {
namespace {

using enum SourceId;
using enum ModelId;

const std::vector<SourceId> kTrainSources = {D1, D3, D4, D5};
const std::vector<SourceId> kEvalSources = {D2, D6};

std::vector<ConditionSpec> build_table() {
  using C = ConditionName;
  const DeepfakeType tta = DeepfakeType::TTA, ata = DeepfakeType::ATA;
  return {
      {C::Train, tta, kTrainSources, {G1, G2, G3}, true, true},
      {C::Valid, tta, kTrainSources, {G1, G2, G3}, true, true},
      {C::Test01, tta, kTrainSources, {G1, G2, G3}, true, true},
      {C::Test02, tta, kTrainSources, {G4, G5}, true, false},
      {C::Test03, tta, kEvalSources, {G1, G2, G3}, false, true},
      {C::Test04, tta, kEvalSources, {G4, G5}, false, false},
      {C::Train, ata, kTrainSources, {G1}, true, true},
      {C::Valid, ata, kTrainSources, {G1}, true, true},
      {C::Test01, ata, kTrainSources, {G1}, true, true},
      {C::Test02, ata, kTrainSources, {G2}, true, false},
      {C::Test03, ata, kEvalSources, {G1}, false, true},
      {C::Test04, ata, kEvalSources, {G2}, false, false},
  };
}

constexpr std::array<std::string_view, 6> kConditionNames = {"Train", "Valid", "Test01",
                                                             "Test02", "Test03", "Test04"};

}  // namespace

std::string_view to_string(ConditionName c) { return kConditionNames[static_cast<std::size_t>(c)]; }

ConditionName parse_condition(std::string_view s) {
  for (std::size_t i = 0; i < kConditionNames.size(); ++i) {
    if (kConditionNames[i] == s) return static_cast<ConditionName>(i);
  }
  fail(ErrorKind::Argument, "unknown condition '" + std::string(s) + "'");
}

Split ConditionSpec::partition() const {
  switch (name) {
    case ConditionName::Train: return Split::Train;
    case ConditionName::Valid: return Split::Valid;
    default: return Split::Test;
  }
}

const ConditionSpec& condition_spec(ConditionName name, DeepfakeType type) {
  static const std::vector<ConditionSpec> table = build_table();
  for (const auto& s : table) {
    if (s.name == name && s.deepfake_type == type) return s;
  }
  fail(ErrorKind::Argument, "no condition for deepfake type " + std::string(to_string(type)));
}

std::string format_condition_spec(const ConditionSpec& spec) {
  std::vector<std::string> src, mod;
  for (auto s : spec.sources) src.emplace_back(to_string(s));
  for (auto m : spec.models) mod.emplace_back(to_string(m));
  std::string out;
  out += "[condition." + std::string(to_string(spec.name)) + "." + std::string(to_string(spec.deepfake_type)) + "]\n";
  out += "sources = " + join(src, ",") + "\n";
  out += "models = " + join(mod, ",") + "\n";
  out += "deepfake_type = " + std::string(to_string(spec.deepfake_type)) + "\n";
  out += std::string("seen_sources = ") + (spec.seen_sources ? "true" : "false") + "\n";
  out += std::string("seen_models = ") + (spec.seen_models ? "true" : "false") + "\n";
  return out;
}

std::vector<ClipRecord> assign_splits(std::vector<ClipRecord> records, const SplitRatios& ratios,
                                      std::uint64_t seed) {
  const double sum = ratios.train + ratios.valid + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9 || ratios.train < 0 || ratios.valid < 0 || ratios.test < 0) {
    fail(ErrorKind::Config, "split ratios must be non-negative and sum to 1");
  }
  std::map<SourceId, std::vector<std::size_t>> by_source;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].label == Label::Real) by_source[records[i].source].push_back(i);
  }
  for (auto& [source, idx] : by_source) {
    if (source_info(source).eval_only) {
      for (auto i : idx) records[i].split = Split::Test;
      continue;
    }
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return records[a].clip_id < records[b].clip_id; });
    Rng rng(splitmix_seed(seed, static_cast<std::uint64_t>(source)));
    rng.shuffle(idx);
    const double n = static_cast<double>(idx.size());
    // The epsilon keeps exact products (e.g. 0.2 * 1695) from flooring down.
    const auto n_valid = static_cast<std::size_t>(std::floor(ratios.valid * n + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(ratios.test * n + 1e-9));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Split s = k < n_valid ? Split::Valid : k < n_valid + n_test ? Split::Test : Split::Train;
      records[idx[k]].split = s;
    }
  }
  std::unordered_map<std::string, Split> real_split;
  for (const auto& r : records) {
    if (r.label == Label::Real) real_split[r.clip_id] = r.split;
  }
  for (auto& r : records) {
    if (r.label != Label::Fake) continue;
    auto it = r.parent_clip_id ? real_split.find(*r.parent_clip_id) : real_split.end();
    if (it == real_split.end()) {
      fail(ErrorKind::Data, "fake " + r.clip_id + " has no real parent in the manifest");
    }
    r.split = it->second;
  }
  return records;
}

ConditionSet materialize(const std::vector<ClipRecord>& records, const ConditionSpec& spec) {
  const Split part = spec.partition();
  auto in = [](const auto& v, auto x) { return std::find(v.begin(), v.end(), x) != v.end(); };
  ConditionSet set;
  for (const auto& r : records) {
    if (r.split != part || !in(spec.sources, r.source)) continue;
    if (r.label == Label::Real) {
      set.reals.push_back(r);
    } else if (r.deepfake_type == spec.deepfake_type && in(spec.models, r.generation_model)) {
      set.fakes.push_back(r);
    }
  }
  sort_by_clip_id(set.reals);
  sort_by_clip_id(set.fakes);
  if (set.reals.empty() && set.fakes.empty()) {
    log_warn("condition " + condition_file_name(spec.name, spec.deepfake_type) + " is empty");
  }
  return set;
}

std::string condition_file_name(ConditionName name, DeepfakeType type) {
  return std::string(to_string(name)) + "_" + std::string(to_string(type)) + ".tsv";
}

bool parse_condition_file_name(const std::string& stem, ConditionName* name, DeepfakeType* type) {
  auto us = stem.find('_');
  if (us == std::string::npos) return false;
  try {
    *name = parse_condition(stem.substr(0, us));
    *type = parse_deepfake_type(stem.substr(us + 1));
  } catch (const Error&) {
    return false;
  }
  return *type != DeepfakeType::None;
}

}  // namespace esdd
