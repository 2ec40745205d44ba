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

// Stand-in generator for end-to-end tests of the external adapter
// protocol: `esdd-stub-adapter <jobs.jsonl> <status.jsonl>`. Each job gets
// seeded noise at its out_path. ESDD_STUB_SECONDS and ESDD_STUB_RATE set the
// clip shape; ESDD_STUB_FAIL is a comma list of job ids to report as failed.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include "esdd/error.hpp"
#include "esdd/genpipe.hpp"
#include "esdd/synthetic.hpp"
#include "esdd/util.hpp"
#include "esdd/wav.hpp"

namespace {

std::string env_or(const char* name, const char* fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? v : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: esdd-stub-adapter <jobs.jsonl> <status.jsonl>\n";
    return 2;
  }
  try {
    const double seconds = std::stod(env_or("ESDD_STUB_SECONDS", "4"));
    const int rate = std::stoi(env_or("ESDD_STUB_RATE", "16000"));
    std::set<std::string> fail_ids;
    for (const auto& id : esdd::split(env_or("ESDD_STUB_FAIL", ""), ','))
      if (!id.empty()) fail_ids.insert(esdd::trim(id));

    std::ofstream status(argv[2], std::ios::app);
    for (const auto& job : esdd::read_jobs(argv[1])) {
      esdd::JobStatus s{job.job_id, true, ""};
      if (fail_ids.count(job.job_id)) {
        s = {job.job_id, false, "stub failure"};
      } else {
        esdd::write_wav_pcm16(job.out_path, esdd::synth_noise(job.seed, seconds, rate));
      }
      status << esdd::status_to_json(s) << "\n";
      status.flush();
    }
  } catch (const std::exception& e) {
    std::cerr << "esdd-stub-adapter: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
