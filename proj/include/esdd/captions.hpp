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
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "esdd/manifest.hpp"
#include "esdd/subprocess.hpp"

namespace esdd {

enum class PromptKind { A, B };

struct PromptTemplate {
  PromptKind kind;
  std::string_view body;  // placeholders: {scene label}, {event labels}
};

const PromptTemplate& prompt_template(PromptKind kind);

// Metadata label -> caption: '_'/'-' become spaces, whitespace collapses,
// first character upper-cased, rest lower-cased, one trailing period.
// Throws Error(Caption) when nothing is left.
std::string rewrite_label(std::string_view raw);

struct RenderedPrompt {
  PromptKind kind;
  std::string text;
};

// Template A when events are present, otherwise B. An empty scene is absent
// and raises Error(Metadata).
RenderedPrompt render_prompt(std::string_view scene, const std::vector<std::string>& events);

// First non-empty line, trimmed, with one pair of surrounding quotes removed.
std::string clean_completion(std::string_view completion);

struct CompletionRequest {
  std::string prompt;
  int max_tokens = 64;
  double temperature = 0.7;
};

std::string request_json(const CompletionRequest& req);

class TextGenClient {
 public:
  virtual ~TextGenClient() = default;
  // Throws on transport or backend failure.
  virtual std::string complete(const CompletionRequest& req) = 0;
};

// Returns a fixed reply for every prompt.
class StubTextGenClient : public TextGenClient {
 public:
  explicit StubTextGenClient(std::string reply) : reply_(std::move(reply)) {}
  std::string complete(const CompletionRequest&) override { return reply_; }

 private:
  std::string reply_;
};

// POSTs {prompt, max_tokens, temperature} as JSON to an http:// URL and reads
// the "completion" field of the JSON reply.
class HttpTextGenClient : public TextGenClient {
 public:
  HttpTextGenClient(std::string url, double timeout_s);
  std::string complete(const CompletionRequest& req) override;

 private:
  std::string host_;
  std::string path_;
  double timeout_s_;
};

// One JSON request object per stdin line; one reply per stdout line, either
// a JSON object with "completion" or the raw completion text.
class SubprocessTextGenClient : public TextGenClient {
 public:
  SubprocessTextGenClient(std::vector<std::string> argv, double timeout_s);
  std::string complete(const CompletionRequest& req) override;

 private:
  std::mutex mutex_;
  LineProcess process_;
  double timeout_s_;
};

// Append-only tab-separated (clip_id, prompt_hash, caption) store; later
// lines win on identical keys.
class CaptionCache {
 public:
  CaptionCache() = default;
  explicit CaptionCache(std::filesystem::path path);

  std::optional<std::string> get(const std::string& clip_id, const std::string& prompt_hash) const;
  void put(const std::string& clip_id, const std::string& prompt_hash, const std::string& caption);
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, std::string> entries_;
};

std::string prompt_hash(std::string_view prompt);

struct CaptionOptions {
  int max_retries = 3;
  int max_tokens = 64;
  double temperature = 0.7;
  int parallelism = 1;
};

struct CaptionFailure {
  std::string clip_id;
  std::string error;
};

struct CaptionResult {
  std::vector<ClipRecord> records;
  std::vector<CaptionFailure> failures;  // clips still needing a caption
  std::size_t generated = 0;             // client completions performed
};

// Fills the caption of each real record that lacks one. `client` may be null
// when no record needs the text generator; `cache` may be null.
CaptionResult caption_manifest(std::vector<ClipRecord> records, TextGenClient* client,
                               CaptionCache* cache, const CaptionOptions& opts = {});

}  // namespace esdd
