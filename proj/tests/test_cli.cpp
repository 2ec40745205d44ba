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
#include <fstream>
#include <sstream>

#include "esdd/cli.hpp"
#include "esdd/error.hpp"
#include "esdd/manifest.hpp"
#include "esdd/util.hpp"
#include "support.hpp"

using namespace esdd;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args, const std::map<std::string, std::string>& env = {}) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err, env);
  return {code, out.str(), err.str()};
}

const char* kIni = R"([run]
seed = 7
[paths]
work_dir = .
[corpus]
d1 = src
[captions]
backend = stub
[generation]
tta_models = G1,G2
ata_models = G1
[detector]
proj_dim = 8
enc_channels = 2,2,4,4
gat_dim = 4
max_epochs = 6
patience = 2
batch_size = 8
)";

// Runs the chain up to the report in a fresh directory.
struct Chain {
  test::TempDir dir;
  std::string ini;
  Chain() {
    ini = (dir / "run.ini").string();
    std::ofstream(ini) << kIni;
  }
  Run step(std::vector<std::string> args, const std::map<std::string, std::string>& env = {}) const {
    args.insert(args.begin(), {"-q", "-c", ini});
    return cli(args, env);
  }
  void build_to_split() const {
    REQUIRE(cli({"synth", "-o", (dir / "src").string(), "-n", "20", "--seconds", "4.5", "--rate", "16000"}).code == 0);
    for (const char* cmd : {"build-manifest", "caption", "plan-gen", "run-gen", "split"}) {
      const Run r = step({cmd});
      INFO(cmd << ": " << r.err);
      REQUIRE(r.code == 0);
    }
  }
};

}  // namespace

TEST_CASE("help, version, and bad flags") {
  const Run help = cli({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("build-manifest") != std::string::npos);
  CHECK(help.out.find("batch_size (int") != std::string::npos);
  const Run version = cli({"--version"});
  CHECK(version.code == kExitOk);
  CHECK(version.out.find(kToolVersion) != std::string::npos);
  CHECK(cli({"--bogus", "split"}).code == kExitConfig);
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"split", "--set", "nope.key=1"}).code == kExitConfig);
  const Run sub_help = cli({"train", "--help"});
  CHECK(sub_help.code == kExitOk);
}

TEST_CASE("full chain is reproducible") {
  Chain c;
  c.build_to_split();
  const auto manifest = c.dir / "manifest.tsv";
  const std::string first_split = read_text_file(manifest);
  REQUIRE(c.step({"split"}).code == 0);
  CHECK(read_text_file(manifest) == first_split);

  const Manifest m = read_manifest(manifest);
  std::size_t reals = 0, fakes = 0;
  for (const auto& r : m.records) (r.label == Label::Real ? reals : fakes) += 1;
  CHECK(reals == 20);
  CHECK(fakes == 60);  // two TTA models and one ATA model
  CHECK(m.provenance.front().rfind(std::string(kToolVersion) + " config=", 0) == 0);
  CHECK(fs::exists(c.dir / "conditions" / "conditions.ini"));

  const Run verify = c.step({"verify"});
  CHECK(verify.code == 0);

  const Run train = c.step({"train"});
  INFO(train.err);
  REQUIRE(train.code == 0);
  CHECK(fs::exists(c.dir / "model" / "detector.ckpt"));
  CHECK(fs::exists(c.dir / "model" / "detector.ckpt.norm"));
  const std::string history = read_text_file(c.dir / "model" / "history.tsv");
  CHECK(history.find("epoch\ttrain_loss") != std::string::npos);

  REQUIRE(c.step({"score"}).code == 0);
  const Run eval = c.step({"eval"});
  INFO(eval.err);
  REQUIRE(eval.code == 0);
  CHECK(eval.out.find("Test01") != std::string::npos);
  const std::string report = read_text_file(c.dir / "report.json");
  const Run rendered = c.step({"report", "-o", (c.dir / "report.md").string()});
  REQUIRE(rendered.code == 0);
  CHECK(fs::exists(c.dir / "report.md"));

  // Rerunning the modelling tail reproduces the report byte for byte.
  REQUIRE(c.step({"train"}).code == 0);
  REQUIRE(c.step({"score"}).code == 0);
  REQUIRE(c.step({"eval"}).code == 0);
  CHECK(read_text_file(c.dir / "report.json") == report);

  SUBCASE("eval names missing scores") {
    std::vector<std::string> lines = split(read_text_file(c.dir / "scores.tsv"), '\n');
    std::string dropped, kept;
    for (const auto& l : lines) {
      if (l.empty()) continue;
      if (dropped.empty() && l[0] != '#' && l.find("clip_id") != 0) {
        dropped = l.substr(0, l.find('\t'));
        continue;
      }
      kept += l + "\n";
    }
    write_text_file(c.dir / "scores.tsv", kept);
    const Run r = c.step({"eval"});
    CHECK(r.code == kExitData);
    CHECK(r.err.find(dropped) != std::string::npos);
  }
  SUBCASE("verify detects a deleted fake") {
    for (const auto& r : m.records)
      if (r.label == Label::Fake) {
        fs::remove(c.dir / r.path);
        break;
      }
    const Run r = c.step({"verify"});
    CHECK(r.code == kExitData);
    CHECK_FALSE(r.err.empty());
  }
}

TEST_CASE("partial failures exit with the partial code") {
  Chain c;
  REQUIRE(cli({"synth", "-o", (c.dir / "src").string(), "-n", "4", "--seconds", "4.5", "--rate", "16000"}).code == 0);
  REQUIRE(c.step({"build-manifest"}).code == 0);

  SUBCASE("caption") {
    // Polyphonic clips without a caption need the text generator.
    REQUIRE(c.step({"build-manifest", "--set", "corpus.d1=", "--set", "corpus.d3=" + (c.dir / "src").string()}).code == 0);
    ::setenv("ESDD_STUB_TEXTGEN_FAIL", "1", 1);
    const Run r = c.step({"caption", "--set", "captions.backend=command", "--set",
                          std::string("captions.command=") + ESDD_STUB_TEXTGEN_PATH, "--set",
                          "captions.max_retries=1"});
    ::unsetenv("ESDD_STUB_TEXTGEN_FAIL");
    CHECK(r.code == kExitPartial);
  }
  SUBCASE("run-gen") {
    REQUIRE(c.step({"caption"}).code == 0);
    REQUIRE(c.step({"plan-gen"}).code == 0);
    const Manifest m = read_manifest(c.dir / "manifest.tsv");
    const std::string victim = m.records.front().clip_id + "__G1__TTA";
    ::setenv("ESDD_STUB_FAIL", victim.c_str(), 1);
    const Run r = c.step({"run-gen", "--set", "generation.adapter=command", "--set",
                          std::string("generation.command=") + ESDD_STUB_ADAPTER_PATH});
    ::unsetenv("ESDD_STUB_FAIL");
    INFO(r.err);
    CHECK(r.code == kExitPartial);
    // A rerun without the injected failure completes the missing job.
    const Run again = c.step({"run-gen", "--set", "generation.adapter=command", "--set",
                              std::string("generation.command=") + ESDD_STUB_ADAPTER_PATH});
    CHECK(again.code == 0);
    std::size_t fakes = 0;
    for (const auto& r2 : read_manifest(c.dir / "manifest.tsv").records) fakes += r2.label == Label::Fake;
    CHECK(fakes == 12);
  }
}

TEST_CASE("configuration errors exit with the config code") {
  test::TempDir dir;
  const Run r = cli({"-c", (dir / "absent.ini").string(), "split"});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("config") != std::string::npos);
  const Run bad = cli({"split", "--set", "splits.train=0.9"}, {{"ESDD_PATHS_WORK_DIR", dir.path().string()}});
  CHECK(bad.code != kExitOk);
}
