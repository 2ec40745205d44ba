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

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esdd/manifest.hpp"
#include "esdd/splits.hpp"

namespace esdd {

struct EerResult {
  double eer = 0.0;        // proportion in [0, 1]
  double threshold = 0.0;  // interpolated crossing abscissa
};

// FAR(t) = |fake >= t| / n_fake, FRR(t) = |real < t| / n_real, evaluated at
// every distinct score (plus a final all-rejected point). The EER is where
// the piecewise-linear FAR - FRR crosses zero. Empty inputs raise
// Error(Argument); non-finite scores raise Error(Data).
EerResult compute_eer(std::span<const double> real_scores, std::span<const double> fake_scores);

struct ScoreRecord {
  std::string clip_id;
  double score = 0.0;  // higher means more confidently real
};

// `clip_id<TAB>score` lines with %.6f scores, preceded by '#' provenance lines.
std::string format_scores(const std::vector<ScoreRecord>& scores,
                          const std::vector<std::string>& provenance = {});
void write_scores(const std::filesystem::path& path, const std::vector<ScoreRecord>& scores,
                  const std::vector<std::string>& provenance = {});
// Duplicate ids or non-finite scores raise Error(Data) naming the clip.
std::map<std::string, double> read_scores(const std::filesystem::path& path);

struct Breakdown {
  AudioType audio_type;
  double eer_percent = 0.0;
  double threshold = 0.0;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
};

struct EvalEntry {
  ConditionName condition;
  DeepfakeType deepfake_type;
  bool seen_sources = false;
  bool seen_models = false;
  double eer_percent = 0.0;
  double threshold = 0.0;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
  std::vector<Breakdown> breakdowns;
};

struct AverageRow {
  DeepfakeType deepfake_type;
  double eer_percent = 0.0;  // unweighted mean over the test conditions present
  std::size_t n_conditions = 0;
};

struct EvalReport {
  std::vector<EvalEntry> entries;
  std::vector<AverageRow> averages;
};

struct ConditionInput {
  ConditionName condition;
  DeepfakeType deepfake_type;
  ConditionSet set;
};

// Loads every `<condition>_<type>.tsv` in a directory, ordered by condition.
std::vector<ConditionInput> load_condition_dir(const std::filesystem::path& dir);

// Missing scores raise Error(Protocol) listing up to 20 clip ids; scores for
// clips outside every condition are ignored with a warning.
EvalReport evaluate(const std::map<std::string, double>& scores,
                    const std::vector<ConditionInput>& conditions, bool audio_type_breakdown);

// Appends the per-type average rows computed from the entries.
void compute_averages(EvalReport& report);

enum class ReportFormat { Tsv, Markdown };

// Two-decimal, round-half-up percentage as printed in the results table.
std::string format_percent(double percent);

std::string render_report(const EvalReport& report, ReportFormat format);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

}  // namespace esdd
