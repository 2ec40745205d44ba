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

#include <doctest.h>

#include <cstdlib>

#include "esdd/error.hpp"
#include "esdd/genpipe.hpp"
#include "esdd/synthetic.hpp"
#include "esdd/util.hpp"
#include "support.hpp"

using namespace esdd;

namespace {

std::vector<ClipRecord> reals(std::size_t n, SourceId src = SourceId::D1) {
  std::vector<ClipRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s_r%03zu_000", std::string(to_string(src)).c_str(), i);
    out.push_back(test::real_record(id, src));
  }
  return out;
}

// Fakes for every (real, model) pair, as a complete generation run would.
std::vector<ClipRecord> with_fakes(const std::vector<ClipRecord>& rs, const std::vector<ModelId>& tta,
                                   const std::vector<ModelId>& ata) {
  std::vector<ClipRecord> all = rs;
  for (const auto& r : rs) {
    for (ModelId m : tta) all.push_back(test::fake_record(r, m, DeepfakeType::TTA));
    for (ModelId m : ata) all.push_back(test::fake_record(r, m, DeepfakeType::ATA));
  }
  return all;
}

// Adapter that writes a given waveform and fails selected jobs.
class ShapeAdapter : public GeneratorAdapter {
 public:
  ShapeAdapter(double seconds, int rate, std::set<std::string> fail = {})
      : seconds_(seconds), rate_(rate), fail_(std::move(fail)) {}
  std::vector<JobStatus> run(const std::vector<GenJob>& jobs, const fs::path&) override {
    std::vector<JobStatus> out;
    for (const auto& j : jobs) {
      ++calls;
      if (fail_.count(j.job_id)) {
        out.push_back({j.job_id, false, "boom"});
        continue;
      }
      write_wav_pcm16(j.out_path, test::tone(500, seconds_, rate_));
      out.push_back({j.job_id, true, ""});
    }
    return out;
  }
  int calls = 0;
  std::set<std::string> fail_;

 private:
  double seconds_;
  int rate_;
};

struct Workspace {
  test::TempDir dir;
  RunOptions opts;
  PlanOptions plan;
  std::map<std::string, ClipRecord> parents;
  std::vector<GenJob> jobs;

  explicit Workspace(std::size_t n) {
    for (auto& r : reals(n)) parents[r.clip_id] = r;
    opts.ledger = dir / "ledger.jsonl";
    opts.audio_dir = dir / "fake";
    opts.manifest_dir = dir.path();
    opts.work_dir = dir / "work";
    plan.raw_dir = dir / "raw";
    plan.manifest_dir = dir.path();
    plan.master_seed = 11;
    std::vector<ClipRecord> rs;
    for (auto& [id, r] : parents) rs.push_back(r);
    jobs = plan_jobs(rs, {ModelId::G1}, DeepfakeType::TTA, plan);
  }
};

}  // namespace

TEST_CASE("model roster") {
  CHECK(model_info(ModelId::G1).name == "AudioLDM");
  CHECK(model_info(ModelId::G2).name == "AudioLDM 2");
  CHECK(model_info(ModelId::G3).name == "AudioGen");
  CHECK(model_info(ModelId::G4).name == "TangoFlux");
  CHECK(model_info(ModelId::G5).name == "AudioLCM");
  for (ModelId m : kAllModels) {
    CHECK(model_supports(m, DeepfakeType::TTA));
    CHECK(model_supports(m, DeepfakeType::ATA) == (m == ModelId::G1 || m == ModelId::G2));
  }
}

TEST_CASE("plan_jobs") {
  PlanOptions opts;
  opts.master_seed = 99;
  opts.raw_dir = "raw";
  const auto rs = reals(100);
  const auto jobs = plan_jobs(rs, {ModelId::G1, ModelId::G2, ModelId::G3}, DeepfakeType::TTA, opts);
  CHECK(jobs.size() == 300);
  CHECK(jobs[0].job_id == rs[0].clip_id + "__G1__TTA");
  std::set<std::uint64_t> seeds;
  for (const auto& j : jobs) {
    CHECK(j.steps == 100);
    CHECK(!j.caption.empty());
    CHECK(j.source_audio.empty());
    seeds.insert(j.seed);
  }
  CHECK(seeds.size() == jobs.size());
  CHECK(plan_jobs(rs, {ModelId::G3, ModelId::G1, ModelId::G2}, DeepfakeType::TTA, opts) == jobs);
  opts.master_seed = 100;
  CHECK(plan_jobs(rs, {ModelId::G1}, DeepfakeType::TTA, opts)[0].seed != jobs[0].seed);

  const auto ata = plan_jobs(rs, {ModelId::G1, ModelId::G2}, DeepfakeType::ATA, opts);
  CHECK(ata.size() == 200);
  CHECK(ata[0].caption.empty());
  CHECK(ata[0].source_audio.find(rs[0].path) != std::string::npos);

  SUBCASE("model without the mode is a plan error") {
    try {
      plan_jobs(rs, {ModelId::G3}, DeepfakeType::ATA, opts);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Plan);
    }
  }
  SUBCASE("missing captions are listed") {
    auto bad = rs;
    bad[3].caption.clear();
    bad[7].caption.clear();
    try {
      plan_jobs(bad, {ModelId::G1}, DeepfakeType::TTA, opts);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Plan);
      const std::string msg = e.what();
      CHECK(msg.find(bad[3].clip_id) != std::string::npos);
      CHECK(msg.find(bad[7].clip_id) != std::string::npos);
    }
    CHECK(plan_jobs(bad, {ModelId::G1}, DeepfakeType::ATA, opts).size() == 100);
  }
}

TEST_CASE("job ids and job files") {
  GenJob j = parse_job_id("D1_a__b_000__G4__TTA");
  CHECK(j.parent_clip_id == "D1_a__b_000");
  CHECK(j.model == ModelId::G4);
  CHECK(j.mode == DeepfakeType::TTA);
  CHECK_THROWS_AS(parse_job_id("nonsense"), Error);
  CHECK_THROWS_AS(parse_job_id("x__G9__TTA"), Error);

  test::TempDir dir;
  PlanOptions opts;
  opts.raw_dir = dir / "raw";
  auto jobs = plan_jobs(reals(3), {ModelId::G1, ModelId::G2}, DeepfakeType::ATA, opts);
  write_jobs(dir / "jobs.jsonl", jobs, {"esdd 0.1.0 config=abc"});
  CHECK(read_text_file(dir / "jobs.jsonl").rfind("# esdd 0.1.0", 0) == 0);
  CHECK(read_jobs(dir / "jobs.jsonl") == jobs);
  const auto line = job_to_json(jobs[0]);
  for (const char* key : {"job_id", "mode", "model", "caption", "source_audio", "steps", "seed", "out_path"})
    CHECK(line.find(std::string("\"") + key + "\"") != std::string::npos);
  CHECK_THROWS_AS(job_from_json("{\"job_id\": 3}"), Error);
}

TEST_CASE("run_jobs with the noise adapter") {
  Workspace ws(3);
  NoiseAdapter adapter;
  RunResult res = run_jobs(ws.jobs, adapter, ws.parents, ws.opts);
  REQUIRE(res.records.size() == 3);
  CHECK(res.failures.empty());
  for (const auto& r : res.records) {
    CHECK(r.label == Label::Fake);
    CHECK(r.deepfake_type == DeepfakeType::TTA);
    CHECK(r.generation_model == ModelId::G1);
    REQUIRE(r.parent_clip_id);
    CHECK(ws.parents.count(*r.parent_clip_id));
    CHECK(read_wav(resolve_clip_path(ws.opts.manifest_dir, r)).samples.size() == 64000);
  }
}

TEST_CASE("adapter output in other formats is normalized") {
  Workspace ws(1);
  ShapeAdapter adapter(6.0, 22050);
  RunResult res = run_jobs(ws.jobs, adapter, ws.parents, ws.opts);
  REQUIRE(res.records.size() == 1);
  WavInfo info;
  Waveform w = read_wav(resolve_clip_path(ws.opts.manifest_dir, res.records[0]), &info);
  CHECK(info.sample_rate == 16000);
  CHECK(w.samples.size() == 64000);

  ShapeAdapter too_short(2.0, 16000);
  Workspace ws2(1);
  RunResult bad = run_jobs(ws2.jobs, too_short, ws2.parents, ws2.opts);
  CHECK(bad.records.empty());
  CHECK(bad.failures.size() == 1);
}

TEST_CASE("partial failure is resumable") {
  Workspace ws(3);
  ShapeAdapter adapter(4.0, 16000, {ws.jobs[1].job_id});
  RunResult first = run_jobs(ws.jobs, adapter, ws.parents, ws.opts);
  CHECK(first.records.size() == 2);
  REQUIRE(first.failures.size() == 1);
  CHECK(first.failures[0].job_id == ws.jobs[1].job_id);
  CHECK(read_statuses(ws.opts.ledger).at(ws.jobs[1].job_id).ok == false);

  adapter.fail_.clear();
  adapter.calls = 0;
  RunResult second = run_jobs(ws.jobs, adapter, ws.parents, ws.opts);
  CHECK(adapter.calls == 1);
  CHECK(second.reused == 2);
  CHECK(second.failures.empty());

  Workspace clean(3);
  ShapeAdapter fresh(4.0, 16000);
  RunResult ref = run_jobs(clean.jobs, fresh, clean.parents, clean.opts);
  REQUIRE(ref.records.size() == second.records.size());
  CHECK(format_manifest({ref.records, {}}) == format_manifest({second.records, {}}));
}

TEST_CASE("unknown parent is a plan error") {
  Workspace ws(2);
  ws.parents.erase(ws.parents.begin());
  NoiseAdapter adapter;
  CHECK_THROWS_AS(run_jobs(ws.jobs, adapter, ws.parents, ws.opts), Error);
}

TEST_CASE("external adapter protocol") {
  Workspace ws(3);
  ::setenv("ESDD_STUB_FAIL", ws.jobs[2].job_id.c_str(), 1);
  ::setenv("ESDD_STUB_SECONDS", "5", 1);
  ::setenv("ESDD_STUB_RATE", "44100", 1);
  ProcessAdapter adapter({ESDD_STUB_ADAPTER_PATH}, 60.0);
  RunResult res = run_jobs(ws.jobs, adapter, ws.parents, ws.opts);
  ::unsetenv("ESDD_STUB_FAIL");
  ::unsetenv("ESDD_STUB_SECONDS");
  ::unsetenv("ESDD_STUB_RATE");
  CHECK(res.records.size() == 2);
  REQUIRE(res.failures.size() == 1);
  CHECK(res.failures[0].error.find("stub failure") != std::string::npos);

  Workspace crash(2);
  ProcessAdapter missing({"/nonexistent/adapter"}, 10.0);
  RunResult r2 = run_jobs(crash.jobs, missing, crash.parents, crash.opts);
  CHECK(r2.records.empty());
  CHECK(r2.failures.size() == 2);
}

TEST_CASE("verify_provenance") {
  const auto rs = reals(10);
  auto all = with_fakes(rs, {ModelId::G1, ModelId::G2, ModelId::G3, ModelId::G4, ModelId::G5},
                        {ModelId::G1, ModelId::G2});
  REQUIRE(all.size() == 80);
  ProvenanceReport ok = verify_provenance(all);
  CHECK(ok.ok());
  REQUIRE(ok.sources.size() == 1);
  CHECK(ok.sources[0].n_tta == 50);
  CHECK(ok.sources[0].n_ata == 20);

  SUBCASE("a deleted fake is named") {
    auto it = std::find_if(all.begin(), all.end(), [&](const ClipRecord& r) {
      return r.clip_id == rs[4].clip_id + "__G3__TTA";
    });
    REQUIRE(it != all.end());
    all.erase(it);
    ProvenanceReport rep = verify_provenance(all);
    CHECK_FALSE(rep.ok());
    REQUIRE(rep.missing.size() == 1);
    CHECK(rep.missing[0].parent_clip_id == rs[4].clip_id);
    CHECK(rep.missing[0].model == ModelId::G3);
    CHECK(rep.missing[0].mode == DeepfakeType::TTA);
    CHECK(format_provenance(rep).find("missing\t" + rs[4].clip_id + "\tG3\tTTA") != std::string::npos);
  }
  SUBCASE("orphans and duplicates") {
    ClipRecord orphan = test::fake_record(test::real_record("D1_gone_000", SourceId::D1), ModelId::G1,
                                          DeepfakeType::TTA);
    all.push_back(orphan);
    ClipRecord dup = all[10];
    dup.clip_id += "_copy";
    all.push_back(dup);
    ProvenanceReport rep = verify_provenance(all);
    CHECK_FALSE(rep.ok());
    CHECK(rep.orphans == std::vector<std::string>{orphan.clip_id});
    CHECK(rep.duplicates.size() == 1);
  }
}
