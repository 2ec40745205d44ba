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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "esdd/manifest.hpp"
#include "esdd/types.hpp"

namespace esdd {

enum class ConditionName { Train, Valid, Test01, Test02, Test03, Test04 };

inline constexpr std::array<ConditionName, 6> kAllConditions = {
    ConditionName::Train, ConditionName::Valid, ConditionName::Test01,
    ConditionName::Test02, ConditionName::Test03, ConditionName::Test04};
inline constexpr std::array<ConditionName, 4> kTestConditions = {
    ConditionName::Test01, ConditionName::Test02, ConditionName::Test03, ConditionName::Test04};

std::string_view to_string(ConditionName c);
ConditionName parse_condition(std::string_view s);

struct ConditionSpec {
  ConditionName name;
  DeepfakeType deepfake_type;
  std::vector<SourceId> sources;
  std::vector<ModelId> models;
  bool seen_sources;
  bool seen_models;

  Split partition() const;
};

// The fixed condition table for TTA and ATA deepfakes.
const ConditionSpec& condition_spec(ConditionName name, DeepfakeType type);

// "key = value" lines of a config section describing the condition.
std::string format_condition_spec(const ConditionSpec& spec);

struct SplitRatios {
  double train = 0.70;
  double valid = 0.20;
  double test = 0.10;
};

// Stratified per source over the training sources (D1, D3, D4, D5): seeded
// shuffle, floor(ratio * n) for valid and test, remainder to train. Eval-only
// sources go to test; fakes inherit their parent's split. Throws
// Error(Config) when the ratios do not sum to 1.
std::vector<ClipRecord> assign_splits(std::vector<ClipRecord> records, const SplitRatios& ratios,
                                      std::uint64_t seed);

struct ConditionSet {
  std::vector<ClipRecord> reals;  // ordered by clip_id
  std::vector<ClipRecord> fakes;  // ordered by clip_id
};

ConditionSet materialize(const std::vector<ClipRecord>& records, const ConditionSpec& spec);

// `<condition>_<type>.tsv`, e.g. Test01_TTA.tsv.
std::string condition_file_name(ConditionName name, DeepfakeType type);
bool parse_condition_file_name(const std::string& stem, ConditionName* name, DeepfakeType* type);

}  // namespace esdd
