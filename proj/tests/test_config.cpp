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

#include <fstream>
#include <functional>

#include "esdd/config.hpp"
#include "esdd/error.hpp"
#include "support.hpp"

using namespace esdd;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Argument;
}

}  // namespace

TEST_CASE("defaults are the documented ones") {
  const auto c = RunConfig::load(std::nullopt, {});
  CHECK(c.get_int("detector.batch_size") == 32);
  CHECK(c.get_double("detector.weight_decay") == 1e-4);
  CHECK(c.get_int("detector.patience") == 5);
  CHECK(c.get_int("detector.max_epochs") == 50);
  CHECK(c.get_double("detector.lr_scratch") == 1e-3);
  CHECK(c.get_double("detector.lr_finetune") == 1e-5);
  CHECK(c.get_list("generation.tta_models") == std::vector<std::string>{"G1", "G2", "G3", "G4", "G5"});
  CHECK(c.get_list("generation.ata_models") == std::vector<std::string>{"G1", "G2"});
  CHECK(c.get_double("splits.train") == 0.7);
  CHECK_FALSE(c.get_bool("eval.breakdown"));
  CHECK(c.get_path("paths.embedding_root").empty());
  CHECK_FALSE(c.is_set("corpus.d1"));
  const auto help = describe_config_keys();
  for (const auto& k : config_keys()) CHECK(help.find("  " + k.key + " (") != std::string::npos);
}

TEST_CASE("precedence: file, environment, overrides") {
  test::TempDir dir;
  std::ofstream(dir / "run.ini") << "[run]\nseed = 7\n\n[paths]\nwork_dir = work\nmanifest = m.tsv\n"
                                    "\n[corpus]\nd1 = data/d1\n";
  const auto file = dir / "run.ini";
  auto c = RunConfig::load(file, {});
  CHECK(c.get_int("run.seed") == 7);
  CHECK(c.get_path("paths.work_dir") == (dir.path() / "work").lexically_normal());
  CHECK(c.get_path("paths.manifest") == (dir.path() / "work" / "m.tsv").lexically_normal());
  CHECK(c.get_path("corpus.d1") == (dir.path() / "data" / "d1").lexically_normal());

  c = RunConfig::load(file, {}, {{"ESDD_PATHS_MANIFEST", "/abs/env.tsv"}, {"ESDD_RUN_SEED", "99"}});
  CHECK(c.get_path("paths.manifest") == "/abs/env.tsv");
  CHECK(c.get_int("run.seed") == 7);  // environment only reaches path keys

  c = RunConfig::load(file, {"paths.manifest=/abs/set.tsv", "run.seed = 11"},
                      {{"ESDD_PATHS_MANIFEST", "/abs/env.tsv"}});
  CHECK(c.get_path("paths.manifest") == "/abs/set.tsv");
  CHECK(c.get_int("run.seed") == 11);
  CHECK(c.resolved_text().find("run.seed = 11\n") != std::string::npos);
}

TEST_CASE("malformed configuration") {
  test::TempDir dir;
  CHECK(kind_of([] { RunConfig::load(std::nullopt, {"run.sed=1"}); }) == ErrorKind::Config);
  CHECK(kind_of([] { RunConfig::load(std::nullopt, {"run.seed"}); }) == ErrorKind::Config);
  CHECK(kind_of([] { RunConfig::load(std::nullopt, {"run.seed=1.5"}); }) == ErrorKind::Config);
  CHECK(kind_of([] { RunConfig::load(std::nullopt, {"splits.train=abc"}); }) == ErrorKind::Config);
  CHECK(kind_of([] { RunConfig::load(std::nullopt, {"eval.breakdown=yes"}); }) == ErrorKind::Config);
  CHECK(kind_of([&] { RunConfig::load(dir / "absent.ini", {}); }) == ErrorKind::Config);
  std::ofstream(dir / "bad.ini") << "[detector]\nbogus = 1\n";
  CHECK(kind_of([&] { RunConfig::load(dir / "bad.ini", {}); }) == ErrorKind::Config);
  std::ofstream(dir / "garbled.ini") << "[detector\nx\n";
  CHECK(kind_of([&] { RunConfig::load(dir / "garbled.ini", {}); }) == ErrorKind::Config);
  const auto c = RunConfig::load(std::nullopt, {});
  CHECK(kind_of([&] { c.get("nope.key"); }) == ErrorKind::Config);
}

TEST_CASE("hash ignores paths and tracks settings") {
  const auto a = RunConfig::load(std::nullopt, {});
  const auto b = RunConfig::load(std::nullopt, {"paths.work_dir=/elsewhere", "corpus.d3=/x"});
  const auto c = RunConfig::load(std::nullopt, {"detector.patience=6"});
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("list values") {
  const auto c = RunConfig::load(std::nullopt, {"generation.tta_models= G2 ,,G4 ", "generation.command=python3  adapter.py --fast",
                                                "detector.enc_channels=4,4,8,8"});
  CHECK(c.get_list("generation.tta_models") == std::vector<std::string>{"G2", "G4"});
  CHECK(c.get_list("generation.command") == std::vector<std::string>{"python3", "adapter.py", "--fast"});
  CHECK(c.get_list("detector.enc_channels").size() == 4);
}
