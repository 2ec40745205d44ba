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

#include <algorithm>
#include <chrono>
#include <random>

#include "esdd/error.hpp"
#include "esdd/evalkit.hpp"
#include "esdd/util.hpp"
#include "support.hpp"

using namespace esdd;

namespace {

struct Point {
  double t, far, frr;
};

// Exhaustive oracle: count FAR/FRR directly at every candidate threshold,
// then walk the operating-point polyline for the first sign change of
// FAR - FRR and interpolate linearly between its ends.
EerResult oracle_eer(const std::vector<double>& real, const std::vector<double>& fake, bool with_midpoints) {
  std::vector<double> cand(real);
  cand.insert(cand.end(), fake.begin(), fake.end());
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  if (with_midpoints) {
    const std::size_t n = cand.size();
    for (std::size_t i = 0; i + 1 < n; ++i) cand.push_back(0.5 * (cand[i] + cand[i + 1]));
    std::sort(cand.begin(), cand.end());
  }
  std::vector<Point> pts;
  for (double t : cand) {
    double fa = 0, fr = 0;
    for (double f : fake) fa += f >= t ? 1 : 0;
    for (double r : real) fr += r < t ? 1 : 0;
    pts.push_back({t, fa / fake.size(), fr / real.size()});
  }
  pts.push_back({cand.back(), 0.0, 1.0});
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d0 = pts[i - 1].far - pts[i - 1].frr;
    const double d1 = pts[i].far - pts[i].frr;
    if (d1 > 0.0) continue;
    if (d1 == 0.0) return {pts[i].far, pts[i].t};
    const double lam = d0 / (d0 - d1);
    return {pts[i - 1].far + lam * (pts[i].far - pts[i - 1].far), pts[i - 1].t + lam * (pts[i].t - pts[i - 1].t)};
  }
  return {0.0, cand.back()};
}

std::vector<double> negate(std::vector<double> v) {
  for (auto& x : v) x = -x;
  return v;
}

}  // namespace

TEST_CASE("eer trivial cases") {
  std::vector<double> hi = {0.9, 1.0}, lo = {0.1, 0.2};
  CHECK(compute_eer(hi, lo).eer == 0.0);
  CHECK(compute_eer(lo, hi).eer == 1.0);

  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> same(100);
  for (auto& x : same) x = u(g);
  CHECK(std::abs(compute_eer(same, same).eer - 0.5) <= 0.005);
}

TEST_CASE("eer matches the exhaustive oracle on random instances") {
  std::mt19937_64 g(20261014);
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const std::size_t nr = 1 + g() % 200, nf = 1 + g() % 200;
    const double shift = std::uniform_real_distribution<double>(-1.0, 1.0)(g);
    // Coarse quantization on a third of the instances forces ties.
    const bool ties = it % 3 == 0;
    std::vector<double> real(nr), fake(nf);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& x : real) x = ties ? std::round(4 * (n(g) + shift)) / 4 : n(g) + shift;
    for (auto& x : fake) x = ties ? std::round(4 * n(g)) / 4 : n(g);
    const EerResult fast = compute_eer(real, fake);
    const EerResult ref = oracle_eer(real, fake, false);
    const EerResult mid = oracle_eer(real, fake, true);
    worst = std::max({worst, std::abs(fast.eer - ref.eer), std::abs(fast.eer - mid.eer)});
    REQUIRE(std::abs(fast.eer - ref.eer) <= 1e-9);
    REQUIRE(std::abs(fast.threshold - ref.threshold) <= 1e-9);
  }
  CHECK(worst <= 1e-9);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 10.0);
}

TEST_CASE("eer order invariance and label-swap symmetry") {
  std::mt19937_64 g(77);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int it = 0; it < 50; ++it) {
    std::vector<double> real(40), fake(60);
    for (auto& x : real) x = n(g) + 0.7;
    for (auto& x : fake) x = n(g);
    const double e = compute_eer(real, fake).eer;
    std::vector<double> r2 = real, f2 = fake;
    for (auto& x : r2) x = 2.0 * x + 0.5;
    for (auto& x : f2) x = 2.0 * x + 0.5;
    CHECK(compute_eer(r2, f2).eer == e);
    CHECK(compute_eer(negate(fake), negate(real)).eer == doctest::Approx(e).epsilon(1e-12));
  }
}

TEST_CASE("eer input errors") {
  std::vector<double> ok = {1.0}, empty;
  CHECK_THROWS_AS(compute_eer(empty, ok), Error);
  try {
    compute_eer(ok, empty);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Argument);
  }
  std::vector<double> bad = {0.0, std::nan("")};
  try {
    compute_eer(bad, ok);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
  }
}

TEST_CASE("percent formatting rounds half up") {
  CHECK(format_percent(100.0 * 0.0008) == "0.08");
  CHECK(format_percent((0.66 + 3.70 + 6.80 + 17.50) / 4.0) == "7.17");
  CHECK(format_percent(0.0) == "0.00");
  CHECK(format_percent(12.344) == "12.34");
  CHECK(format_percent(12.345) == "12.35");
}

namespace {

ConditionInput condition(ConditionName name, DeepfakeType type, const std::vector<ClipRecord>& reals,
                         const std::vector<ClipRecord>& fakes) {
  ConditionInput in;
  in.condition = name;
  in.deepfake_type = type;
  in.set.reals = reals;
  in.set.fakes = fakes;
  return in;
}

}  // namespace

TEST_CASE("evaluate reports per-condition EER and averages") {
  auto r1 = test::real_record("D1_a", SourceId::D1, Split::Test);
  auto r2 = test::real_record("D3_b", SourceId::D3, Split::Test);
  auto f1 = test::fake_record(r1, ModelId::G1, DeepfakeType::TTA);
  auto f2 = test::fake_record(r2, ModelId::G1, DeepfakeType::TTA);
  std::map<std::string, double> scores = {{r1.clip_id, 2}, {r2.clip_id, 3}, {f1.clip_id, -3}, {f2.clip_id, -2}};
  std::vector<ConditionInput> conds = {condition(ConditionName::Test01, DeepfakeType::TTA, {r1, r2}, {f1, f2})};

  EvalReport rep = evaluate(scores, conds, true);
  REQUIRE(rep.entries.size() == 1);
  CHECK(rep.entries[0].eer_percent == 0.0);
  CHECK(rep.entries[0].n_real == 2);
  CHECK(rep.entries[0].n_fake == 2);
  CHECK(rep.entries[0].seen_sources);
  CHECK(rep.entries[0].seen_models);
  REQUIRE(rep.entries[0].breakdowns.size() == 2);
  REQUIRE(rep.averages.size() == 1);
  CHECK(rep.averages[0].deepfake_type == DeepfakeType::TTA);

  SUBCASE("extra scores are ignored") {
    scores["unrelated"] = 0.0;
    CHECK(evaluate(scores, conds, false).entries[0].eer_percent == 0.0);
  }
  SUBCASE("a missing score is a protocol error naming the clip") {
    scores.erase(f2.clip_id);
    try {
      evaluate(scores, conds, false);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Protocol);
      CHECK(std::string(e.what()).find(f2.clip_id) != std::string::npos);
    }
  }
}

TEST_CASE("average row is the unweighted mean of test conditions") {
  EvalReport rep;
  const double eers[] = {0.66, 3.70, 6.80, 17.50};
  for (std::size_t i = 0; i < 4; ++i) {
    EvalEntry e;
    e.condition = kTestConditions[i];
    e.deepfake_type = DeepfakeType::TTA;
    e.eer_percent = eers[i];
    rep.entries.push_back(e);
  }
  compute_averages(rep);
  REQUIRE(rep.averages.size() == 1);
  CHECK(rep.averages[0].n_conditions == 4);
  const std::string md = render_report(rep, ReportFormat::Markdown);
  CHECK(md.find("| Average | - | - | 7.17 | - |") != std::string::npos);
}

TEST_CASE("tsv and markdown carry identical numeric cells") {
  EvalReport rep;
  for (ConditionName c : kTestConditions) {
    for (DeepfakeType t : {DeepfakeType::TTA, DeepfakeType::ATA}) {
      EvalEntry e;
      e.condition = c;
      e.deepfake_type = t;
      e.eer_percent = 1.234 * static_cast<int>(c) + (t == DeepfakeType::ATA ? 0.5 : 0.0);
      rep.entries.push_back(e);
    }
  }
  compute_averages(rep);
  auto cells = [](const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
      if ((ch >= '0' && ch <= '9') || ch == '.') {
        cur += ch;
      } else if (!cur.empty()) {
        if (cur.find('.') != std::string::npos) out.push_back(cur);
        cur.clear();
      }
    }
    return out;
  };
  const std::string tsv = render_report(rep, ReportFormat::Tsv);
  const std::string md = render_report(rep, ReportFormat::Markdown);
  CHECK(cells(tsv) == cells(md));
  CHECK(cells(tsv).size() == 10);
  CHECK(tsv.find("condition\tseen_sd\tseen_gm\ttta_eer\tata_eer\n") == 0);
  CHECK(tsv.find("mono_eer") == std::string::npos);  // no breakdown section
}

TEST_CASE("report json round trip") {
  EvalReport rep;
  EvalEntry e;
  e.condition = ConditionName::Test03;
  e.deepfake_type = DeepfakeType::ATA;
  e.eer_percent = 12.5;
  e.threshold = -0.25;
  e.n_real = 3;
  e.n_fake = 3;
  e.breakdowns.push_back({AudioType::Polyphonic, 10.0, 0.1, 2, 2});
  rep.entries.push_back(e);
  compute_averages(rep);
  const EvalReport back = report_from_json(report_to_json(rep));
  CHECK(render_report(back, ReportFormat::Tsv) == render_report(rep, ReportFormat::Tsv));
  CHECK_THROWS_AS(report_from_json("[1,2]"), Error);
}

TEST_CASE("score files") {
  test::TempDir dir;
  const auto path = dir / "scores.tsv";
  write_scores(path, {{"a", 1.0}, {"b", -0.1234567}}, {"esdd 0.1.0 config=0"});
  const std::string text = read_text_file(path);
  CHECK(text == "# esdd 0.1.0 config=0\na\t1.000000\nb\t-0.123457\n");
  const auto back = read_scores(path);
  CHECK(back.at("b") == doctest::Approx(-0.123457));
  write_text_file(path, "a\t1\na\t2\n");
  CHECK_THROWS_AS(read_scores(path), Error);
  write_text_file(path, "a\tinf\n");
  CHECK_THROWS_AS(read_scores(path), Error);
}
