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

#include "esdd/captions.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cctype>

#include "esdd/corpus.hpp"
#include "esdd/error.hpp"
#include "esdd/hash.hpp"
#include "esdd/util.hpp"

namespace esdd {
namespace {

constexpr PromptTemplate kPromptA{
    PromptKind::A,
    "This clip is recorded in {scene label}, where the following events or sounds are "
    "happening: {event labels}. A caption is a descriptive sentence, which vividly depicts "
    "the acoustic content of the audio clip. Please provide one sentence for the caption to "
    "directly describe the sound."};

constexpr PromptTemplate kPromptB{
    PromptKind::B,
    "This clip is an audio clip recorded in {scene label}. A caption is a descriptive "
    "sentence, which vividly depicts the acoustic content of the audio clip. Please provide "
    "one sentence for the caption to directly describe the sound that might occur in the "
    "scene."};

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

const PromptTemplate& prompt_template(PromptKind kind) {
  return kind == PromptKind::A ? kPromptA : kPromptB;
}

std::string rewrite_label(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (char c : raw) {
    if (c == '_' || c == '-' || is_ascii_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  while (!out.empty() && (out.back() == '.' || out.back() == ' ')) out.pop_back();
  if (out.empty()) fail(ErrorKind::Caption, "label '" + std::string(raw) + "' is empty after rewriting");
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto u = static_cast<unsigned char>(out[i]);
    if (u < 0x80) out[i] = static_cast<char>(i == 0 ? std::toupper(u) : std::tolower(u));
  }
  out.push_back('.');
  return out;
}

RenderedPrompt render_prompt(std::string_view scene, const std::vector<std::string>& events) {
  if (scene.empty()) fail(ErrorKind::Metadata, "prompt rendering needs a scene label");
  const PromptTemplate& t = events.empty() ? kPromptB : kPromptA;
  std::string text(t.body);
  replace_all(text, "{scene label}", scene);
  if (!events.empty()) replace_all(text, "{event labels}", join(events, ", "));
  return {t.kind, std::move(text)};
}

std::string clean_completion(std::string_view completion) {
  for (const auto& line : split(completion, '\n')) {
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t.size() >= 2 && ((t.front() == '"' && t.back() == '"') || (t.front() == '\'' && t.back() == '\''))) {
      t = trim(std::string_view(t).substr(1, t.size() - 2));
    } else if (t.size() >= 6 && t.rfind("\xE2\x80\x9C", 0) == 0 &&
               t.compare(t.size() - 3, 3, "\xE2\x80\x9D") == 0) {
      t = trim(std::string_view(t).substr(3, t.size() - 6));
    }
    if (!t.empty()) return t;
  }
  return {};
}

std::string request_json(const CompletionRequest& req) {
  nlohmann::json j = {{"prompt", req.prompt}, {"max_tokens", req.max_tokens},
                      {"temperature", req.temperature}};
  return j.dump();
}

HttpTextGenClient::HttpTextGenClient(std::string url, double timeout_s) : timeout_s_(timeout_s) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) fail(ErrorKind::Config, "text-generation endpoint must be http://, got " + url);
  auto rest = url.substr(scheme.size());
  auto slash = rest.find('/');
  host_ = scheme + rest.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : rest.substr(slash);
}

std::string HttpTextGenClient::complete(const CompletionRequest& req) {
  httplib::Client cli(host_);
  const auto secs = static_cast<time_t>(timeout_s_);
  const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  auto res = cli.Post(path_, request_json(req), "application/json");
  if (!res) fail(ErrorKind::Io, "text-generation request to " + host_ + path_ + " failed: " +
                                    httplib::to_string(res.error()));
  if (res->status != 200) fail(ErrorKind::Io, "text-generation endpoint returned HTTP " + std::to_string(res->status));
  auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (!body.is_object() || !body.contains("completion") || !body["completion"].is_string()) {
    fail(ErrorKind::Io, "text-generation reply lacks a string 'completion' field");
  }
  return body["completion"].get<std::string>();
}

SubprocessTextGenClient::SubprocessTextGenClient(std::vector<std::string> argv, double timeout_s)
    : process_(std::move(argv)), timeout_s_(timeout_s) {}

std::string SubprocessTextGenClient::complete(const CompletionRequest& req) {
  std::lock_guard lock(mutex_);
  std::string reply = process_.exchange(request_json(req), timeout_s_);
  auto j = nlohmann::json::parse(reply, nullptr, false);
  if (j.is_object() && j.contains("completion") && j["completion"].is_string()) {
    return j["completion"].get<std::string>();
  }
  return reply;
}

CaptionCache::CaptionCache(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  for (const auto& line : split(read_text_file(path_), '\n')) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 3) continue;
    entries_[f[0] + '\t' + f[1]] = f[2];
  }
}

std::optional<std::string> CaptionCache::get(const std::string& clip_id,
                                             const std::string& hash) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(clip_id + '\t' + hash);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void CaptionCache::put(const std::string& clip_id, const std::string& hash,
                       const std::string& caption) {
  std::string clean = caption;
  for (char& c : clean) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  std::lock_guard lock(mutex_);
  entries_[clip_id + '\t' + hash] = clean;
  if (!path_.empty()) append_text_line(path_, clip_id + '\t' + hash + '\t' + clean);
}

std::size_t CaptionCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::string prompt_hash(std::string_view prompt) { return hex64(fnv1a64(prompt)); }

CaptionResult caption_manifest(std::vector<ClipRecord> records, TextGenClient* client,
                               CaptionCache* cache, const CaptionOptions& opts) {
  CaptionResult result;
  std::vector<std::optional<CaptionFailure>> failures(records.size());
  std::vector<std::size_t> llm_work;

  for (std::size_t i = 0; i < records.size(); ++i) {
    ClipRecord& r = records[i];
    if (r.label != Label::Real || !r.caption.empty()) continue;
    const SourceDataset& info = source_info(r.source);
    if (info.provides_captions) {
      failures[i] = CaptionFailure{r.clip_id, "caption-bearing source record has no caption"};
    } else if (r.audio_type == AudioType::Monophonic) {
      if (r.events.empty()) {
        failures[i] = CaptionFailure{r.clip_id, "monophonic record has no event label"};
        continue;
      }
      try {
        r.caption = rewrite_label(r.events.front());
      } catch (const Error& e) {
        failures[i] = CaptionFailure{r.clip_id, e.what()};
      }
    } else {
      llm_work.push_back(i);
    }
  }

  std::atomic<std::size_t> generated{0};
  parallel_for(llm_work.size(), opts.parallelism, [&](std::size_t k) {
    const std::size_t i = llm_work[k];
    ClipRecord& r = records[i];
    RenderedPrompt prompt;
    try {
      prompt = render_prompt(r.scene, r.events);
    } catch (const Error& e) {
      failures[i] = CaptionFailure{r.clip_id, e.what()};
      return;
    }
    const std::string hash = prompt_hash(prompt.text);
    if (cache) {
      if (auto hit = cache->get(r.clip_id, hash)) {
        r.caption = *hit;
        return;
      }
    }
    if (!client) {
      failures[i] = CaptionFailure{r.clip_id, "no text-generation client configured"};
      return;
    }
    CompletionRequest req{prompt.text, opts.max_tokens, opts.temperature};
    std::string last_error = "empty completion";
    for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
      try {
        std::string caption = clean_completion(client->complete(req));
        ++generated;
        if (caption.empty()) {
          last_error = "empty completion";
          continue;
        }
        r.caption = caption;
        if (cache) cache->put(r.clip_id, hash, caption);
        return;
      } catch (const std::exception& e) {
        last_error = e.what();
      }
    }
    failures[i] = CaptionFailure{r.clip_id, "after " + std::to_string(opts.max_retries + 1) +
                                                " attempts: " + last_error};
  });

  for (auto& f : failures) {
    if (f) result.failures.push_back(std::move(*f));
  }
  result.generated = generated;
  result.records = std::move(records);
  return result;
}

}  // namespace esdd
