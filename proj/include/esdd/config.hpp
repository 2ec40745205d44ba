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
#include <optional>
#include <string>
#include <vector>

namespace esdd {

enum class KeyKind { Path, String, Int, Float, Bool, List };

struct KeySpec {
  std::string section;
  std::string key;
  KeyKind kind;
  std::string default_value;
  std::string help;

  std::string dotted() const { return section + "." + key; }
};

// Every recognized configuration key.
const std::vector<KeySpec>& config_keys();

// One line per key: `section.key (kind, default): help`.
std::string describe_config_keys();

// Sectioned key-value configuration. Sources in increasing precedence:
// defaults, the INI file, ESDD_<SECTION>_<KEY> environment variables (path
// keys only), then `section.key=value` overrides. Unknown keys and
// malformed values raise Error(Config).
class RunConfig {
 public:
  static RunConfig load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides,
                        const std::map<std::string, std::string>& env = {});

  std::string get(const std::string& dotted) const;
  long get_int(const std::string& dotted) const;
  double get_double(const std::string& dotted) const;
  bool get_bool(const std::string& dotted) const;
  std::vector<std::string> get_list(const std::string& dotted) const;
  // Empty values stay empty. Relative paths under [paths] resolve against
  // paths.work_dir; others against the directory they were given relative to.
  std::filesystem::path get_path(const std::string& dotted) const;
  bool is_set(const std::string& dotted) const { return !get(dotted).empty(); }

  // Sorted `section.key = value` lines of the resolved configuration.
  std::string resolved_text() const;
  // Hash over the non-path settings, so relocating a work tree keeps it.
  std::string hash() const;

 private:
  struct Value {
    std::string text;
    std::filesystem::path base;  // relative paths resolve against this
  };
  std::map<std::string, Value> values_;
  const KeySpec& spec(const std::string& dotted) const;
  std::filesystem::path resolve(const std::string& dotted, const std::filesystem::path& raw) const;
};

}  // namespace esdd
