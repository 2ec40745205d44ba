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

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace esdd {

// Entry point of the `esdd` command. args excludes the program name.
// Returns the process exit code: 0 ok, 2 config/usage error, 3 data or
// protocol error, 4 partial completion.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::map<std::string, std::string>& env = {});

// Environment variables with the ESDD_ prefix.
std::map<std::string, std::string> esdd_environment();

}  // namespace esdd
