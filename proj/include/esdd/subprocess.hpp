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

#include <string>
#include <string_view>
#include <vector>

namespace esdd {

struct ProcessResult {
  int exit_code = -1;  // 128 + signal when killed
  bool timed_out = false;
  std::string out;
  std::string err;
};

// Runs argv[0] (PATH lookup) to completion, feeding `input` on stdin and
// capturing both output streams. timeout_s <= 0 waits indefinitely.
ProcessResult run_process(const std::vector<std::string>& argv, std::string_view input = {},
                          double timeout_s = 0.0);

// A long-lived child speaking a line protocol on stdin/stdout.
class LineProcess {
 public:
  explicit LineProcess(std::vector<std::string> argv);
  ~LineProcess();
  LineProcess(const LineProcess&) = delete;
  LineProcess& operator=(const LineProcess&) = delete;

  // Sends one line and waits for one reply line. Throws Error(Io) on EOF or
  // timeout; the child is then restarted on the next call.
  std::string exchange(std::string_view line, double timeout_s);

 private:
  void start();
  void stop();

  std::vector<std::string> argv_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string pending_;
};

}  // namespace esdd
