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

// Line-protocol text generator for tests: reads one JSON request per line
// and answers with a JSON completion derived from the prompt's last line.
// With ESDD_STUB_TEXTGEN_FAIL set, every request gets an empty reply.
#include <cstdlib>
#include <iostream>
#include <json.hpp>
#include <string>

int main() {
  const bool failing = std::getenv("ESDD_STUB_TEXTGEN_FAIL") != nullptr;
  std::string line;
  while (std::getline(std::cin, line)) {
    auto req = nlohmann::json::parse(line, nullptr, false);
    std::string prompt = req.is_object() && req.contains("prompt") && req["prompt"].is_string()
                             ? req["prompt"].get<std::string>()
                             : std::string();
    nlohmann::json reply;
    if (failing) {
      reply["completion"] = "";
    } else {
      const auto nl = prompt.find_last_of('\n');
      std::string tail = nl == std::string::npos ? prompt : prompt.substr(nl + 1);
      reply["completion"] = "Generated caption: " + std::to_string(tail.size()) + " chars of context.";
    }
    std::cout << reply.dump() << std::endl;
  }
  return 0;
}
