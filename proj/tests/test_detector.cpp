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

#include <chrono>
#include <cmath>
#include <cstring>

#include "esdd/detector.hpp"
#include "esdd/error.hpp"
#include "esdd/train.hpp"
#include "support.hpp"

using namespace esdd;

namespace {

DetectorConfig tiny_config() {
  DetectorConfig c;
  c.input_dim = 6;
  c.proj_dim = 8;
  c.enc_channels = {2, 2, 2, 2};
  c.gat_dim = 4;
  return c;
}

FeatureMatrix random_input(std::size_t frames, std::size_t dims, std::uint64_t seed) {
  Rng r(seed);
  FeatureMatrix x;
  x.frames = frames;
  x.dims = dims;
  x.values.resize(frames * dims);
  for (auto& v : x.values) v = static_cast<float>(r.normal());
  return x;
}

template <typename T>
std::size_t tensor_index(const ParamSet<T>& p, const std::string& name) {
  for (std::size_t i = 0; i < p.tensors.size(); ++i)
    if (p.tensors[i].name == name) return i;
  FAIL("no tensor " << name);
  return 0;
}

}  // namespace

TEST_CASE("forward shape contract") {
  DetectorConfig cfg;  // full-size defaults
  Detector<float> det(cfg);
  const auto p = det.init_params(3);
  const auto x = random_input(398, 64, 1);
  const auto out = det.forward(p, x);
  CHECK(out.spectral_nodes == 16);
  CHECK(out.temporal_nodes == 50);
  CHECK(out.logits.size() == 2);
  CHECK(std::isfinite(out.score));
  CHECK(spectral_node_count(cfg) == 16);
  CHECK(temporal_node_count(398) == 50);

  const auto again = det.forward(p, x);
  CHECK(std::memcmp(&again.logits, &out.logits, sizeof out.logits) == 0);
  CHECK(std::memcmp(&again.score, &out.score, sizeof out.score) == 0);
}

TEST_CASE("shape invariants across lengths") {
  const DetectorConfig cfg = tiny_config();
  Detector<float> det(cfg);
  const auto p = det.init_params(1);
  for (std::size_t t : {8u, 9u, 15u, 16u, 17u, 40u, 101u}) {
    CAPTURE(t);
    const auto out = det.forward(p, random_input(t, 6, t));
    CHECK(out.temporal_nodes == (t + 7) / 8);
    CHECK(out.spectral_nodes == 1);  // ceil(8 / 8)
    const double e0 = std::exp(double(out.logits[0])), e1 = std::exp(double(out.logits[1]));
    CHECK(e0 / (e0 + e1) + e1 / (e0 + e1) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK((out.score > 0) == (e1 / (e0 + e1) > 0.5));
    CHECK(out.score == out.logits[kRealClass] - out.logits[kFakeClass]);
  }
}

TEST_CASE("parameter layout is deterministic") {
  const Detector<float> det(tiny_config());
  const auto a = det.init_params(5), b = det.init_params(5), c = det.init_params(6);
  CHECK(a.count() == b.count());
  CHECK(a.tensors.front().data == b.tensors.front().data);
  CHECK(a.tensors.front().data != c.tensors.front().data);
  CHECK(a.count() == c.count());
  CHECK(a.all_finite());
  DetectorConfig wider = tiny_config();
  wider.gat_dim = 8;
  CHECK(Detector<float>(wider).init_params(5).count() > a.count());
}

TEST_CASE("shape errors name expected and actual") {
  const Detector<float> det(tiny_config());
  const auto p = det.init_params(0);
  try {
    det.forward(p, random_input(20, 7, 1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Shape);
    const std::string msg = e.what();
    CHECK(msg.find('6') != std::string::npos);
    CHECK(msg.find('7') != std::string::npos);
  }
  FeatureMatrix empty;
  empty.dims = 6;
  CHECK_THROWS_AS(det.forward(p, empty), Error);
  auto broken = p;
  broken.tensors.pop_back();
  CHECK_THROWS_AS(det.forward(broken, random_input(20, 6, 1)), Error);
}

TEST_CASE("cross-entropy") {
  CHECK(cross_entropy({{0.0, 0.0}}, {Label::Real}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  std::array<double, 2> sat{};
  sat[kRealClass] = 20.0;
  sat[kFakeClass] = -20.0;
  CHECK(cross_entropy({sat}, {Label::Real}) < 1e-8);
  CHECK(cross_entropy({sat}, {Label::Real}) > 0.0);

  Rng r(8);
  std::vector<std::array<double, 2>> logits(8);
  std::vector<Label> labels(8);
  double oracle = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    logits[i] = {3 * r.normal(), 3 * r.normal()};
    labels[i] = r.uniform() < 0.5 ? Label::Real : Label::Fake;
    const double p_real = 1.0 / (1.0 + std::exp(logits[i][kFakeClass] - logits[i][kRealClass]));
    oracle += -std::log(labels[i] == Label::Real ? p_real : 1.0 - p_real);
  }
  CHECK(cross_entropy(logits, labels) == doctest::Approx(oracle / 8).epsilon(1e-6));
  // Weighted mean normalizes by the total weight.
  const double wl = cross_entropy({{0.0, 0.0}, sat}, {Label::Fake, Label::Real}, {3.0, 1.0});
  CHECK(wl == doctest::Approx((3.0 * std::log(2.0) + cross_entropy({sat}, {Label::Real})) / 4.0));
  try {
    cross_entropy({}, {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Argument);
  }
}

TEST_CASE("float gradient check on the tiny config across seeds") {
  const DetectorConfig cfg = tiny_config();
  const Detector<float> det(cfg);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CAPTURE(seed);
    const auto p = det.init_params(seed);
    const auto x = random_input(20, 6, 100 + seed);
    GradCheckOptions opts;
    opts.per_tensor = 64;
    opts.seed = seed;
    const GradCheckResult r = grad_check(det, p, x, seed % 2 ? Label::Real : Label::Fake, 1e-3f, opts);
    CHECK(r.max_rel_error < 1e-2);
    CHECK(r.checked > 100);
    CHECK(r.groups_checked >= r.groups_total / 5);
    MESSAGE("seed " << seed << ": max rel " << r.max_rel_error << " over " << r.checked << " coords, "
                    << r.groups_checked << "/" << r.groups_total << " tensors");
  }
}

TEST_CASE("double gradient check covers every tensor") {
  const DetectorConfig cfg = tiny_config();
  const Detector<double> det(cfg);
  const auto p = det.init_params(2);
  const auto x = random_input(20, 6, 102);
  GradCheckOptions opts;
  opts.per_tensor = 64;
  opts.jitter = 1;
  opts.rel_tol = 1e-4;
  const GradCheckResult r = grad_check(det, p, x, Label::Fake, 1e-5, opts);
  CHECK(r.max_rel_error < 1e-4);
  CHECK(r.groups_checked == r.groups_total);
}

TEST_CASE("finite differences shrink quadratically on a smooth coordinate") {
  const Detector<double> det(tiny_config());
  const auto p = det.init_params(4);
  const auto x = random_input(20, 6, 104);
  const Label label = Label::Real;
  const auto g = loss_gradient(det, p, x, label);
  const std::size_t tw = tensor_index(p, "out.w");
  std::size_t tested = 0;
  for (std::size_t i = 0; i < p.tensors[tw].data.size() && tested < 4; ++i) {
    const double ga = g.tensors[tw].data[i];
    const auto f1 = finite_difference(det, p, x, label, tw, i, 0.05);
    const auto f2 = finite_difference(det, p, x, label, tw, i, 0.1);
    if (!f1.smooth || !f2.smooth || std::abs(f1.value - ga) < 1e-10) continue;
    const double ratio = (f2.value - ga) / (f1.value - ga);
    CAPTURE(i);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.1));
    ++tested;
  }
  CHECK(tested >= 2);
}

TEST_CASE("zero input with zero biases leaves the projection weights without gradient") {
  const Detector<float> det(tiny_config());
  auto p = det.init_params(1);
  for (auto& t : p.tensors) {
    const auto& n = t.name;
    if (n.size() > 2 && (n.ends_with(".b") || n.find(".bias.") != std::string::npos || n.ends_with(".shift")))
      std::fill(t.data.begin(), t.data.end(), 0.0f);
  }
  FeatureMatrix x = random_input(20, 6, 1);
  std::fill(x.values.begin(), x.values.end(), 0.0f);
  const auto g = loss_gradient(det, p, x, Label::Real);
  const std::size_t tw = tensor_index(p, "proj.w");
  for (float v : g.tensors[tw].data) REQUIRE(v == 0.0f);
}

TEST_CASE("inference scores do not depend on batch order or worker count") {
  const Detector<float> det(tiny_config());
  const auto p = det.init_params(9);
  std::vector<LabeledFeatures> set;
  for (std::size_t i = 0; i < 7; ++i)
    set.push_back({"clip" + std::to_string(i), random_input(24, 6, 50 + i), Label::Real});
  const auto a = score_features(det, p, set, 1);
  auto reversed = set;
  std::reverse(reversed.begin(), reversed.end());
  const auto b = score_features(det, p, reversed, 3);
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(a[i].clip_id == set[i].clip_id);
    CHECK(std::memcmp(&a[i].score, &b[set.size() - 1 - i].score, sizeof(double)) == 0);
  }
}

TEST_CASE("checkpoints") {
  test::TempDir dir;
  DetectorConfig cfg = tiny_config();
  cfg.front_end_id = "logmel6";
  cfg.seed = 17;
  const Detector<float> det(cfg);
  const auto p = det.init_params(11);
  save_checkpoint(dir / "m.ckpt", cfg, p);
  DetectorConfig back_cfg;
  const auto back = load_checkpoint(dir / "m.ckpt", &back_cfg);
  CHECK(back_cfg == cfg);
  REQUIRE(back.tensors.size() == p.tensors.size());
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    CHECK(back.tensors[i].name == p.tensors[i].name);
    CHECK(back.tensors[i].shape == p.tensors[i].shape);
    CHECK(std::memcmp(back.tensors[i].data.data(), p.tensors[i].data.data(), p.tensors[i].data.size() * 4) == 0);
  }
  const std::string bytes = read_text_file(dir / "m.ckpt");
  CHECK(bytes.rfind(std::string(kCheckpointMagic, 8), 0) == 0);

  SUBCASE("bad magic") {
    std::string bad = bytes;
    bad[0] = 'X';
    write_text_file(dir / "bad.ckpt", bad);
    try {
      load_checkpoint(dir / "bad.ckpt", nullptr);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Format);
    }
  }
  SUBCASE("truncation") {
    write_text_file(dir / "short.ckpt", bytes.substr(0, bytes.size() - 5));
    try {
      load_checkpoint(dir / "short.ckpt", nullptr);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Length);
    }
  }
  SUBCASE("config json") {
    CHECK(config_from_json(config_to_json(cfg)) == cfg);
    CHECK_THROWS_AS(config_from_json("{\"proj_dim\": \"x\"}"), Error);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt", nullptr), Error);
}
