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

#include "esdd/genpipe.hpp"

#include <json.hpp>

#include <algorithm>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "esdd/error.hpp"
#include "esdd/hash.hpp"
#include "esdd/subprocess.hpp"
#include "esdd/synthetic.hpp"
#include "esdd/util.hpp"

namespace esdd {
namespace {

using json = nlohmann::json;

const std::vector<GenerationModel>& roster() {
  static const std::vector<GenerationModel> table = {
      {ModelId::G1, "AudioLDM", true, true},
      {ModelId::G2, "AudioLDM 2", true, true},
      {ModelId::G3, "AudioGen", true, false},
      {ModelId::G4, "TangoFlux", true, false},
      {ModelId::G5, "AudioLCM", true, false},
  };
  return table;
}

bool valid_clip_file(const std::filesystem::path& p) {
  try {
    WavInfo info = probe_wav(p);
    return info.sample_rate == kTargetRate && info.channels == 1 && info.frames == kClipSamples;
  } catch (const Error&) {
    return false;
  }
}

std::string tail(const std::string& s, std::size_t n) {
  return s.size() <= n ? s : s.substr(s.size() - n);
}

}  // namespace

const GenerationModel& model_info(ModelId id) {
  if (id == ModelId::None) fail(ErrorKind::Argument, "no generation model 'none'");
  return roster().at(static_cast<std::size_t>(id) - 1);
}

bool model_supports(ModelId id, DeepfakeType mode) {
  const auto& m = model_info(id);
  return mode == DeepfakeType::TTA ? m.tta : mode == DeepfakeType::ATA ? m.ata : false;
}

std::string make_job_id(const std::string& parent, ModelId model, DeepfakeType mode) {
  return parent + "__" + std::string(to_string(model)) + "__" + std::string(to_string(mode));
}

GenJob parse_job_id(const std::string& job_id) {
  auto second = job_id.rfind("__");
  auto first = second == std::string::npos || second == 0 ? std::string::npos : job_id.rfind("__", second - 1);
  if (first == std::string::npos) fail(ErrorKind::Plan, "malformed job id " + job_id);
  GenJob j;
  j.job_id = job_id;
  j.parent_clip_id = job_id.substr(0, first);
  try {
    j.model = parse_model(job_id.substr(first + 2, second - first - 2));
    j.mode = parse_deepfake_type(job_id.substr(second + 2));
  } catch (const Error& e) {
    fail(ErrorKind::Plan, "malformed job id " + job_id + ": " + e.what());
  }
  return j;
}

std::vector<GenJob> plan_jobs(const std::vector<ClipRecord>& reals, const std::vector<ModelId>& models,
                              DeepfakeType mode, const PlanOptions& opts) {
  if (mode == DeepfakeType::None) fail(ErrorKind::Plan, "deepfake mode must be TTA or ATA");
  for (ModelId m : models) {
    if (m == ModelId::None || !model_supports(m, mode)) {
      fail(ErrorKind::Plan, "model " + std::string(to_string(m)) + " does not support " +
                                std::string(to_string(mode)));
    }
  }
  std::vector<std::string> missing;
  for (const auto& r : reals) {
    if (r.label != Label::Real) fail(ErrorKind::Plan, "cannot plan generation from fake clip " + r.clip_id);
    if (mode == DeepfakeType::TTA && r.caption.empty()) missing.push_back(r.clip_id);
  }
  if (!missing.empty()) {
    fail(ErrorKind::Plan, "TTA planning needs captions; missing for: " + join(missing, ", "));
  }
  std::vector<const ClipRecord*> ordered;
  for (const auto& r : reals) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const ClipRecord* a, const ClipRecord* b) { return a->clip_id < b->clip_id; });
  std::vector<ModelId> model_order(models.begin(), models.end());
  std::sort(model_order.begin(), model_order.end());
  model_order.erase(std::unique(model_order.begin(), model_order.end()), model_order.end());

  std::vector<GenJob> jobs;
  jobs.reserve(ordered.size() * model_order.size());
  for (const ClipRecord* r : ordered) {
    for (ModelId m : model_order) {
      GenJob j;
      j.job_id = make_job_id(r->clip_id, m, mode);
      j.parent_clip_id = r->clip_id;
      j.mode = mode;
      j.model = m;
      if (mode == DeepfakeType::TTA) {
        j.caption = r->caption;
      } else {
        j.source_audio = resolve_clip_path(opts.manifest_dir, *r).generic_string();
      }
      j.steps = kInferenceSteps;
      j.seed = fnv1a64(j.job_id, splitmix64(opts.master_seed)) & 0x7fffffffULL;
      j.out_path = (opts.raw_dir / (j.job_id + ".wav")).generic_string();
      jobs.push_back(std::move(j));
    }
  }
  return jobs;
}

std::string job_to_json(const GenJob& job) {
  json j;
  j["job_id"] = job.job_id;
  j["mode"] = std::string(to_string(job.mode));
  j["model"] = std::string(to_string(job.model));
  j["caption"] = job.mode == DeepfakeType::TTA ? json(job.caption) : json(nullptr);
  j["source_audio"] = job.mode == DeepfakeType::ATA ? json(job.source_audio) : json(nullptr);
  j["steps"] = job.steps;
  j["seed"] = job.seed;
  j["out_path"] = job.out_path;
  return j.dump();
}

GenJob job_from_json(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (!j.is_object()) fail(ErrorKind::Plan, "job line is not a JSON object");
  try {
    GenJob job = parse_job_id(j.at("job_id").get<std::string>());
    if (parse_deepfake_type(j.at("mode").get<std::string>()) != job.mode ||
        parse_model(j.at("model").get<std::string>()) != job.model) {
      fail(ErrorKind::Plan, "job " + job.job_id + ": mode/model disagree with job_id");
    }
    if (!j.at("caption").is_null()) job.caption = j["caption"].get<std::string>();
    if (!j.at("source_audio").is_null()) job.source_audio = j["source_audio"].get<std::string>();
    job.steps = j.at("steps").get<int>();
    job.seed = j.at("seed").get<std::uint64_t>();
    job.out_path = j.at("out_path").get<std::string>();
    return job;
  } catch (const json::exception& e) {
    fail(ErrorKind::Plan, std::string("bad job line: ") + e.what());
  }
}

void write_jobs(const std::filesystem::path& path, const std::vector<GenJob>& jobs,
                const std::vector<std::string>& provenance) {
  std::string out;
  for (const auto& p : provenance) out += "# " + p + "\n";
  for (const auto& j : jobs) out += job_to_json(j) + "\n";
  write_text_file(path, out);
}

std::vector<GenJob> read_jobs(const std::filesystem::path& path) {
  std::vector<GenJob> jobs;
  for (const auto& line : split(read_text_file(path), '\n')) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    jobs.push_back(job_from_json(t));
  }
  return jobs;
}

std::string status_to_json(const JobStatus& s) {
  json j;
  j["job_id"] = s.job_id;
  j["status"] = s.ok ? "ok" : "failed";
  j["error"] = s.ok ? json(nullptr) : json(s.error);
  return j.dump();
}

std::map<std::string, JobStatus> read_statuses(const std::filesystem::path& path) {
  std::map<std::string, JobStatus> out;
  if (!std::filesystem::exists(path)) return out;
  for (const auto& line : split(read_text_file(path), '\n')) {
    json j = json::parse(line, nullptr, false);
    if (!j.is_object() || !j.contains("job_id") || !j["job_id"].is_string()) continue;
    JobStatus s;
    s.job_id = j["job_id"].get<std::string>();
    s.ok = j.value("status", "") == "ok";
    if (j.contains("error") && j["error"].is_string()) s.error = j["error"].get<std::string>();
    out[s.job_id] = s;
  }
  return out;
}

std::vector<JobStatus> ProcessAdapter::run(const std::vector<GenJob>& jobs,
                                           const std::filesystem::path& work_dir) {
  std::filesystem::create_directories(work_dir);
  const auto job_file = work_dir / "jobs.jsonl";
  const auto status_file = work_dir / "status.jsonl";
  std::filesystem::remove(status_file);
  write_jobs(job_file, jobs);
  for (const auto& j : jobs) {
    std::filesystem::path out(j.out_path);
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  }
  std::vector<std::string> argv = argv_;
  argv.push_back(job_file.string());
  argv.push_back(status_file.string());
  ProcessResult proc = run_process(argv, {}, timeout_s_);
  auto reported = read_statuses(status_file);
  std::vector<JobStatus> out;
  for (const auto& j : jobs) {
    auto it = reported.find(j.job_id);
    if (it != reported.end() && (it->second.ok || !it->second.error.empty())) {
      out.push_back(it->second);
      continue;
    }
    JobStatus s{j.job_id, false, ""};
    if (proc.timed_out) s.error = "adapter timed out";
    else if (proc.exit_code != 0) s.error = "adapter exited with code " + std::to_string(proc.exit_code);
    else s.error = "adapter reported no status";
    if (!proc.err.empty()) s.error += ": " + tail(trim(proc.err), 400);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<JobStatus> NoiseAdapter::run(const std::vector<GenJob>& jobs, const std::filesystem::path&) {
  std::vector<JobStatus> out;
  for (const auto& j : jobs) {
    if (fail_ids_.count(j.job_id)) {
      out.push_back({j.job_id, false, "injected failure"});
      continue;
    }
    write_wav_pcm16(j.out_path, synth_noise(j.seed, seconds_, rate_));
    out.push_back({j.job_id, true, ""});
  }
  return out;
}

RunResult run_jobs(const std::vector<GenJob>& jobs, GeneratorAdapter& adapter,
                   const std::map<std::string, ClipRecord>& parents, const RunOptions& opts) {
  for (const auto& j : jobs) {
    if (!parents.count(j.parent_clip_id)) {
      fail(ErrorKind::Plan, "job " + j.job_id + " references unknown parent " + j.parent_clip_id);
    }
  }
  auto make_record = [&](const GenJob& j, const std::filesystem::path& wav) {
    const ClipRecord& parent = parents.at(j.parent_clip_id);
    ClipRecord r;
    r.clip_id = j.job_id;
    r.source = parent.source;
    r.audio_type = parent.audio_type;
    r.label = Label::Fake;
    r.deepfake_type = j.mode;
    r.generation_model = j.model;
    r.split = parent.split;
    r.parent_clip_id = parent.clip_id;
    r.path = std::filesystem::relative(wav, opts.manifest_dir).generic_string();
    r.sample_rate = kTargetRate;
    r.duration = kClipSeconds;
    r.caption = j.mode == DeepfakeType::TTA ? j.caption : std::string();
    r.scene = parent.scene;
    r.events = parent.events;
    return r;
  };

  RunResult result;
  const auto ledger = read_statuses(opts.ledger);
  std::vector<const GenJob*> pending;
  for (const auto& j : jobs) {
    auto it = ledger.find(j.job_id);
    const auto wav = opts.audio_dir / (j.job_id + ".wav");
    if (it != ledger.end() && it->second.ok && valid_clip_file(wav)) {
      result.records.push_back(make_record(j, wav));
      ++result.reused;
    } else {
      pending.push_back(&j);
    }
  }

  const std::size_t batches =
      std::min<std::size_t>(pending.size(), static_cast<std::size_t>(std::max(1, opts.parallelism)));
  std::vector<std::vector<GenJob>> batch_jobs(batches);
  for (std::size_t i = 0; i < pending.size(); ++i) batch_jobs[i % batches].push_back(*pending[i]);

  std::mutex merge_mutex;
  std::map<std::string, ClipRecord> done;
  std::map<std::string, std::string> failed;
  parallel_for(batches, opts.parallelism, [&](std::size_t b) {
    std::vector<JobStatus> statuses;
    std::string batch_error;
    try {
      statuses = adapter.run(batch_jobs[b], opts.work_dir / ("batch" + std::to_string(b)));
    } catch (const std::exception& e) {
      batch_error = std::string("adapter crashed: ") + e.what();
    }
    std::map<std::string, JobStatus> by_id;
    for (auto& s : statuses) by_id[s.job_id] = s;
    for (const auto& j : batch_jobs[b]) {
      JobStatus s{j.job_id, false, batch_error.empty() ? "adapter reported no status" : batch_error};
      if (auto it = by_id.find(j.job_id); it != by_id.end()) s = it->second;
      const auto wav = opts.audio_dir / (j.job_id + ".wav");
      std::optional<ClipRecord> rec;
      if (s.ok) {
        try {
          if (!std::filesystem::exists(j.out_path)) fail(ErrorKind::Adapter, "output file missing: " + j.out_path);
          write_wav_pcm16(wav, normalize_clip(read_wav(j.out_path), opts.resampler));
          rec = make_record(j, wav);
        } catch (const std::exception& e) {
          s.ok = false;
          s.error = e.what();
        }
      }
      std::lock_guard lock(merge_mutex);
      append_text_line(opts.ledger, status_to_json(s));
      if (rec) done.emplace(j.job_id, std::move(*rec));
      else failed.emplace(j.job_id, s.error);
    }
  });

  for (auto& [id, r] : done) result.records.push_back(std::move(r));
  for (auto& [id, e] : failed) result.failures.push_back({id, e});
  sort_by_clip_id(result.records);
  return result;
}

ProvenanceReport verify_provenance(const std::vector<ClipRecord>& records) {
  ProvenanceReport report;
  std::unordered_map<std::string, const ClipRecord*> reals;
  std::map<SourceId, SourceProvenance> per_source;
  for (const auto& r : records) {
    if (r.label != Label::Real) continue;
    reals.emplace(r.clip_id, &r);
    auto& sp = per_source[r.source];
    sp.source = r.source;
    ++sp.n_real;
  }
  std::map<std::tuple<std::string, ModelId, DeepfakeType>, std::size_t> pair_counts;
  for (const auto& r : records) {
    if (r.label != Label::Fake) continue;
    auto it = r.parent_clip_id ? reals.find(*r.parent_clip_id) : reals.end();
    if (it == reals.end()) {
      report.orphans.push_back(r.clip_id);
      continue;
    }
    if (it->second->source != r.source || it->second->audio_type != r.audio_type) {
      report.mismatched.push_back(r.clip_id);
    }
    auto& sp = per_source[it->second->source];
    if (r.deepfake_type == DeepfakeType::TTA) {
      sp.tta_models.insert(r.generation_model);
      ++sp.n_tta;
    } else if (r.deepfake_type == DeepfakeType::ATA) {
      sp.ata_models.insert(r.generation_model);
      ++sp.n_ata;
    }
    ++pair_counts[{*r.parent_clip_id, r.generation_model, r.deepfake_type}];
  }
  std::vector<const ClipRecord*> ordered_reals;
  for (const auto& [id, r] : reals) ordered_reals.push_back(r);
  std::sort(ordered_reals.begin(), ordered_reals.end(),
            [](const ClipRecord* a, const ClipRecord* b) { return a->clip_id < b->clip_id; });
  for (const ClipRecord* real : ordered_reals) {
    auto& sp = per_source[real->source];
    for (auto [mode, models] : {std::pair{DeepfakeType::TTA, &sp.tta_models},
                                std::pair{DeepfakeType::ATA, &sp.ata_models}}) {
      for (ModelId m : *models) {
        auto it = pair_counts.find({real->clip_id, m, mode});
        const std::size_t n = it == pair_counts.end() ? 0 : it->second;
        if (n == 0) report.missing.push_back({real->clip_id, m, mode});
        if (n > 1) report.duplicates.push_back(make_job_id(real->clip_id, m, mode));
      }
    }
  }
  for (auto& [id, sp] : per_source) {
    sp.ok = sp.n_tta == sp.tta_models.size() * sp.n_real && sp.n_ata == sp.ata_models.size() * sp.n_real;
    report.sources.push_back(sp);
  }
  std::sort(report.orphans.begin(), report.orphans.end());
  std::sort(report.mismatched.begin(), report.mismatched.end());
  return report;
}

std::string format_provenance(const ProvenanceReport& report) {
  std::ostringstream out;
  out << "source\tn_real\ttta_models\tn_fake_tta\tata_models\tn_fake_ata\tstatus\n";
  auto models = [](const std::set<ModelId>& s) {
    std::vector<std::string> names;
    for (ModelId m : s) names.emplace_back(to_string(m));
    return names.empty() ? std::string("-") : join(names, ",");
  };
  for (const auto& sp : report.sources) {
    out << to_string(sp.source) << '\t' << sp.n_real << '\t' << models(sp.tta_models) << '\t'
        << sp.n_tta << '\t' << models(sp.ata_models) << '\t' << sp.n_ata << '\t'
        << (sp.ok ? "ok" : "MISMATCH") << '\n';
  }
  for (const auto& m : report.missing) {
    out << "missing\t" << m.parent_clip_id << '\t' << to_string(m.model) << '\t' << to_string(m.mode) << '\n';
  }
  for (const auto& o : report.orphans) out << "orphan\t" << o << '\n';
  for (const auto& d : report.duplicates) out << "duplicate\t" << d << '\n';
  for (const auto& m : report.mismatched) out << "mismatched\t" << m << '\n';
  out << (report.ok() ? "provenance: pass" : "provenance: FAIL") << '\n';
  return out.str();
}

}  // namespace esdd
