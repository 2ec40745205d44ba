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

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "esdd/corpus.hpp"
#include "esdd/manifest.hpp"
#include "esdd/types.hpp"

namespace esdd {

inline constexpr int kInferenceSteps = 100;

struct GenerationModel {
  ModelId id;
  std::string name;
  bool tta;
  bool ata;
};

// Fixed G1..G5 roster.
const GenerationModel& model_info(ModelId id);
bool model_supports(ModelId id, DeepfakeType mode);

struct GenJob {
  std::string job_id;
  std::string parent_clip_id;
  DeepfakeType mode = DeepfakeType::TTA;
  ModelId model = ModelId::G1;
  std::string caption;       // TTA only
  std::string source_audio;  // ATA only
  int steps = kInferenceSteps;
  std::uint64_t seed = 0;
  std::string out_path;

  bool operator==(const GenJob&) const = default;
};

std::string make_job_id(const std::string& parent, ModelId model, DeepfakeType mode);
// Inverse of make_job_id; throws Error(Plan) on malformed ids.
GenJob parse_job_id(const std::string& job_id);

struct PlanOptions {
  std::uint64_t master_seed = 0;
  std::filesystem::path raw_dir;       // adapter writes <job_id>.wav here
  std::filesystem::path manifest_dir;  // resolves parent audio paths for ATA
};

// |reals| x |models| jobs in (clip_id, model) order.
std::vector<GenJob> plan_jobs(const std::vector<ClipRecord>& reals, const std::vector<ModelId>& models,
                              DeepfakeType mode, const PlanOptions& opts);

std::string job_to_json(const GenJob& job);
GenJob job_from_json(const std::string& line);
// JSON lines, optionally preceded by '#' provenance lines (skipped on read).
void write_jobs(const std::filesystem::path& path, const std::vector<GenJob>& jobs,
                const std::vector<std::string>& provenance = {});
std::vector<GenJob> read_jobs(const std::filesystem::path& path);

struct JobStatus {
  std::string job_id;
  bool ok = false;
  std::string error;
};

std::string status_to_json(const JobStatus& s);
// Last line per job_id wins. Unparseable lines are ignored.
std::map<std::string, JobStatus> read_statuses(const std::filesystem::path& path);

class GeneratorAdapter {
 public:
  virtual ~GeneratorAdapter() = default;
  // Runs a batch. work_dir is private to this call.
  virtual std::vector<JobStatus> run(const std::vector<GenJob>& jobs,
                                     const std::filesystem::path& work_dir) = 0;
};

// External program: `argv... <jobs.jsonl> <status.jsonl>`.
class ProcessAdapter : public GeneratorAdapter {
 public:
  explicit ProcessAdapter(std::vector<std::string> argv, double timeout_s = 0.0)
      : argv_(std::move(argv)), timeout_s_(timeout_s) {}
  std::vector<JobStatus> run(const std::vector<GenJob>& jobs,
                             const std::filesystem::path& work_dir) override;

 private:
  std::vector<std::string> argv_;
  double timeout_s_;
};

// In-process adapter writing band-limited noise; backs the synthetic fixture.
class NoiseAdapter : public GeneratorAdapter {
 public:
  NoiseAdapter(double seconds = 4.0, int sample_rate = kTargetRate, std::set<std::string> fail_ids = {})
      : seconds_(seconds), rate_(sample_rate), fail_ids_(std::move(fail_ids)) {}
  std::vector<JobStatus> run(const std::vector<GenJob>& jobs,
                             const std::filesystem::path& work_dir) override;

 private:
  double seconds_;
  int rate_;
  std::set<std::string> fail_ids_;
};

struct RunOptions {
  std::filesystem::path ledger;        // append-only status ledger
  std::filesystem::path audio_dir;     // normalized clips land here
  std::filesystem::path manifest_dir;  // record paths relative to this
  std::filesystem::path work_dir;      // per-batch job/status files
  int parallelism = 1;
  ResamplerParams resampler;
};

struct JobFailure {
  std::string job_id;
  std::string error;
};

struct RunResult {
  std::vector<ClipRecord> records;  // sorted by clip_id
  std::vector<JobFailure> failures;
  std::size_t reused = 0;  // satisfied from the ledger without rerunning
};

// `parents` must contain every job's parent record.
RunResult run_jobs(const std::vector<GenJob>& jobs, GeneratorAdapter& adapter,
                   const std::map<std::string, ClipRecord>& parents, const RunOptions& opts);

struct SourceProvenance {
  SourceId source;
  std::size_t n_real = 0;
  std::set<ModelId> tta_models;
  std::set<ModelId> ata_models;
  std::size_t n_tta = 0;
  std::size_t n_ata = 0;
  bool ok = true;
};

struct MissingFake {
  std::string parent_clip_id;
  ModelId model;
  DeepfakeType mode;
};

struct ProvenanceReport {
  std::vector<SourceProvenance> sources;
  std::vector<MissingFake> missing;
  std::vector<std::string> orphans;     // fakes whose parent is absent
  std::vector<std::string> duplicates;  // repeated (parent, model, mode)
  std::vector<std::string> mismatched;  // source/audio_type differs from parent
  bool ok() const {
    for (const auto& s : sources) {
      if (!s.ok) return false;
    }
    return missing.empty() && orphans.empty() && duplicates.empty() && mismatched.empty();
  }
};

// Checks #fake_TTA = |TTA models| x #real and #fake_ATA = |ATA models| x #real
// per source. Model sets default to those observed for the source.
ProvenanceReport verify_provenance(const std::vector<ClipRecord>& records);

std::string format_provenance(const ProvenanceReport& report);

}  // namespace esdd
