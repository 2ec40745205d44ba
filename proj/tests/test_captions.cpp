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

#include <atomic>
#include <httplib.h>
#include <json.hpp>
#include <random>
#include <thread>

#include "esdd/captions.hpp"
#include "esdd/error.hpp"
#include "esdd/util.hpp"
#include "support.hpp"

using namespace esdd;

namespace {

// Counts calls and fails the first `fail_first` of them.
class CountingClient : public TextGenClient {
 public:
  CountingClient(std::string reply, int fail_first = 0) : reply_(std::move(reply)), fail_first_(fail_first) {}
  std::string complete(const CompletionRequest& req) override {
    last_prompt = req.prompt;
    if (calls++ < fail_first_) throw std::runtime_error("backend unavailable");
    return reply_;
  }
  std::atomic<int> calls{0};
  std::string last_prompt;

 private:
  std::string reply_;
  int fail_first_;
};

ClipRecord poly(const std::string& id, const std::string& scene, std::vector<std::string> events) {
  ClipRecord r = test::real_record(id, SourceId::D3);
  r.caption.clear();
  r.scene = scene;
  r.events = std::move(events);
  return r;
}

}  // namespace

TEST_CASE("label rewriting") {
  CHECK(rewrite_label("gun_shot") == "Gun shot.");
  CHECK(rewrite_label("siren") == "Siren.");
  CHECK(rewrite_label("dog_bark") == "Dog bark.");
  CHECK(rewrite_label("drilling") == "Drilling.");
  CHECK(rewrite_label("  Car--HORN__3 ") == "Car horn 3.");
  CHECK(rewrite_label("engine_idling.") == "Engine idling.");
  CHECK_THROWS_AS(rewrite_label(" _-  "), Error);
  try {
    rewrite_label("");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Caption);
  }
}

TEST_CASE("label rewriting is idempotent") {
  std::mt19937_64 g(3);
  const std::string alphabet = "abcXYZ019 _-.\t";
  int accepted = 0;
  for (int i = 0; i < 1000; ++i) {
    std::string s;
    const std::size_t n = g() % 16;
    for (std::size_t k = 0; k < n; ++k) s += alphabet[g() % alphabet.size()];
    std::string once;
    try {
      once = rewrite_label(s);
    } catch (const Error&) {
      continue;
    }
    ++accepted;
    CHECK(rewrite_label(once) == once);
    CHECK(once.back() == '.');
    CHECK(once.find("  ") == std::string::npos);
  }
  CHECK(accepted > 500);
}

TEST_CASE("prompt templates") {
  CHECK(prompt_template(PromptKind::A).body ==
        "This clip is recorded in {scene label}, where the following events or sounds are happening: {event labels}. "
        "A caption is a descriptive sentence, which vividly depicts the acoustic content of the audio clip. Please "
        "provide one sentence for the caption to directly describe the sound.");
  CHECK(prompt_template(PromptKind::B).body ==
        "This clip is an audio clip recorded in {scene label}. A caption is a descriptive sentence, which vividly "
        "depicts the acoustic content of the audio clip. Please provide one sentence for the caption to directly "
        "describe the sound that might occur in the scene.");

  auto a = render_prompt("airport", {"announcement", "footsteps"});
  CHECK(a.kind == PromptKind::A);
  CHECK(a.text ==
        "This clip is recorded in airport, where the following events or sounds are happening: announcement, "
        "footsteps. A caption is a descriptive sentence, which vividly depicts the acoustic content of the audio "
        "clip. Please provide one sentence for the caption to directly describe the sound.");
  auto b = render_prompt("office", {});
  CHECK(b.kind == PromptKind::B);
  CHECK(b.text.find("recorded in office.") != std::string::npos);
  // Labels are interpolated verbatim.
  auto raw = render_prompt("Metro_Station", {"people talking", "Door-slam"});
  CHECK(raw.text.find("Metro_Station") != std::string::npos);
  CHECK(raw.text.find("people talking, Door-slam") != std::string::npos);
  try {
    render_prompt("", {"x"});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Metadata);
  }
}

TEST_CASE("completion cleanup") {
  CHECK(clean_completion("\n\n  \"Birds sing in a park.\"  \nSure, here it is") == "Birds sing in a park.");
  CHECK(clean_completion("'Rain.'") == "Rain.");
  CHECK(clean_completion("\xE2\x80\x9CWind howls.\xE2\x80\x9D") == "Wind howls.");
  CHECK(clean_completion("   \n  ") == "");
}

TEST_CASE("caption_manifest") {
  std::vector<ClipRecord> recs;
  ClipRecord d6 = test::real_record("D6_x_000", SourceId::D6);
  d6.caption = "Water runs over rocks.";
  recs.push_back(d6);
  ClipRecord d1 = test::real_record("D1_y_000", SourceId::D1);
  d1.caption.clear();
  d1.events = {"drilling"};
  recs.push_back(d1);
  recs.push_back(poly("D3_z_000", "park", {"birds"}));
  recs.push_back(poly("D4_w_000", "office", {}));

  CountingClient client("STUB CAPTION");
  auto res = caption_manifest(recs, &client, nullptr);
  REQUIRE(res.failures.empty());
  CHECK(res.records[0].caption == "Water runs over rocks.");
  CHECK(res.records[1].caption == "Drilling.");
  CHECK(res.records[2].caption == "STUB CAPTION");
  CHECK(res.records[3].caption == "STUB CAPTION");
  CHECK(res.generated == 2);
  CHECK(client.calls == 2);

  SUBCASE("records with captions are never touched") {
    auto again = caption_manifest(res.records, &client, nullptr);
    CHECK(again.records == res.records);
    CHECK(client.calls == 2);
  }
  SUBCASE("cache makes reruns free") {
    test::TempDir dir;
    CaptionCache cache(dir / "cache.tsv");
    caption_manifest(recs, &client, &cache);
    CHECK(cache.size() == 2);
    CaptionCache reloaded(dir / "cache.tsv");
    CountingClient other("DIFFERENT");
    auto rerun = caption_manifest(recs, &other, &reloaded);
    CHECK(other.calls == 0);
    CHECK(rerun.records[2].caption == "STUB CAPTION");
  }
  SUBCASE("retries then failure list") {
    CountingClient flaky("OK.", 1);
    CaptionOptions opts;
    opts.max_retries = 2;
    auto r = caption_manifest({recs[2]}, &flaky, nullptr, opts);
    CHECK(r.failures.empty());
    CHECK(r.records[0].caption == "OK.");

    CountingClient dead("never", 100);
    auto f = caption_manifest({recs[2], recs[3]}, &dead, nullptr, opts);
    REQUIRE(f.failures.size() == 2);
    CHECK(f.failures[0].clip_id == "D3_z_000");
    CHECK(dead.calls == 6);
    CHECK(f.records[0].caption.empty());
  }
  SUBCASE("no client needed for monophonic and caption-bearing records") {
    auto r = caption_manifest({recs[0], recs[1]}, nullptr, nullptr);
    CHECK(r.failures.empty());
  }
  SUBCASE("missing scene is collected as a failure") {
    auto r = caption_manifest({poly("D5_q_000", "", {"x"})}, &client, nullptr);
    CHECK(r.failures.size() == 1);
  }
}

TEST_CASE("caption cache file") {
  test::TempDir dir;
  {
    CaptionCache c(dir / "c.tsv");
    c.put("a", "h1", "First.");
    c.put("a", "h1", "Second.");
    c.put("b", "h2", "Other.");
  }
  CaptionCache c(dir / "c.tsv");
  CHECK(c.get("a", "h1") == "Second.");
  CHECK(c.get("a", "h2") == std::nullopt);
  CHECK(c.size() == 2);
  CHECK(prompt_hash("x") == prompt_hash("x"));
  CHECK(prompt_hash("x") != prompt_hash("y"));
}

TEST_CASE("http text generation client") {
  httplib::Server server;
  std::string seen_body;
  server.Post("/v1/complete", [&](const httplib::Request& req, httplib::Response& res) {
    seen_body = req.body;
    res.set_content(R"({"completion": "\"A bell rings.\"\nextra"})", "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  HttpTextGenClient client(base + "/v1/complete", 5.0);
  const auto reply = client.complete({"hello", 32, 0.5});
  CHECK(clean_completion(reply) == "A bell rings.");
  auto sent = nlohmann::json::parse(seen_body);
  CHECK(sent["prompt"] == "hello");
  CHECK(sent["max_tokens"] == 32);
  CHECK(sent["temperature"] == 0.5);

  HttpTextGenClient broken(base + "/broken", 5.0);
  CHECK_THROWS_AS(broken.complete({"x", 1, 0.0}), Error);
  server.stop();
  th.join();
  CHECK_THROWS_AS(HttpTextGenClient("https://example.org", 1.0), Error);
}

TEST_CASE("subprocess text generation client") {
  SubprocessTextGenClient client({ESDD_STUB_TEXTGEN_PATH}, 10.0);
  const std::string a = client.complete({"line one\nabc", 16, 0.0});
  const std::string b = client.complete({"line one\nabc", 16, 0.0});
  CHECK(a == "Generated caption: 3 chars of context.");
  CHECK(a == b);
}
