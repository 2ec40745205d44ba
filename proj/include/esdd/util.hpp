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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace esdd {

namespace fs = std::filesystem;

inline constexpr std::string_view kToolVersion = "esdd 0.1.0";

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string trim(std::string_view s);

std::string read_text_file(const fs::path& path);
// Writes via a sibling temp file and rename, so readers never see a torn file.
void write_text_file(const fs::path& path, std::string_view content);
void append_text_line(const fs::path& path, std::string_view line);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions from workers
// are rethrown on the calling thread (first by index).
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

void log_info(std::string_view msg);
void log_warn(std::string_view msg);
void set_log_quiet(bool quiet);

// Cross-platform deterministic RNG: mt19937_64 bits with hand-rolled
// distributions, since std:: distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  std::uint64_t below(std::uint64_t n);   // [0, n)
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace esdd
