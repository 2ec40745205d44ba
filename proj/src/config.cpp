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

#include "esdd/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cctype>
#include <charconv>
#include <cstdlib>

#include "esdd/error.hpp"
#include "esdd/hash.hpp"
#include "esdd/util.hpp"

namespace esdd {

namespace {

using K = KeyKind;

std::vector<KeySpec> build_keys() {
  return {
      {"run", "seed", K::Int, "0", "master seed; every random stream derives from it"},
      {"run", "jobs", K::Int, "1", "worker threads per command (overridden by --jobs)"},

      {"paths", "work_dir", K::Path, ".", "root for the relative paths below"},
      {"paths", "manifest", K::Path, "manifest.tsv", "clip manifest read and written by every stage"},
      {"paths", "audio_dir", K::Path, "audio/real", "normalized 16 kHz real clips"},
      {"paths", "fake_audio_dir", K::Path, "audio/fake", "normalized 16 kHz generated clips"},
      {"paths", "raw_dir", K::Path, "gen/raw", "raw generator outputs before normalization"},
      {"paths", "jobs_file", K::Path, "gen/jobs.jsonl", "generation plan"},
      {"paths", "ledger", K::Path, "gen/ledger.jsonl", "append-only generation status ledger"},
      {"paths", "gen_work_dir", K::Path, "gen/work", "per-batch adapter job and status files"},
      {"paths", "caption_cache", K::Path, "captions.cache.tsv", "cache of generated captions"},
      {"paths", "conditions_dir", K::Path, "conditions", "materialized <condition>_<type>.tsv sets"},
      {"paths", "embedding_root", K::Path, "", "directory of <clip_id>.emb files (embedding front-end)"},
      {"paths", "checkpoint", K::Path, "model/detector.ckpt", "detector checkpoint; stats go to <checkpoint>.norm"},
      {"paths", "history", K::Path, "model/history.tsv", "per-epoch training history"},
      {"paths", "scores", K::Path, "scores.tsv", "score file written by score, read by eval"},
      {"paths", "report", K::Path, "report.json", "evaluation report written by eval, read by report"},

      {"corpus", "d1", K::Path, "", "root of source dataset D1 (contains metadata.tsv)"},
      {"corpus", "d2", K::Path, "", "root of source dataset D2"},
      {"corpus", "d3", K::Path, "", "root of source dataset D3"},
      {"corpus", "d4", K::Path, "", "root of source dataset D4"},
      {"corpus", "d5", K::Path, "", "root of source dataset D5"},
      {"corpus", "d6", K::Path, "", "root of source dataset D6"},
      {"corpus", "d1_include", K::Path, "", "optional list of relative audio paths to keep for D1"},
      {"corpus", "d2_include", K::Path, "", "include list for D2"},
      {"corpus", "d3_include", K::Path, "", "include list for D3"},
      {"corpus", "d4_include", K::Path, "", "include list for D4"},
      {"corpus", "d5_include", K::Path, "", "include list for D5"},
      {"corpus", "d6_include", K::Path, "", "include list for D6"},
      {"corpus", "min_duration", K::Float, "4.0", "minimum clip duration in seconds (inclusive)"},
      {"corpus", "min_sample_rate", K::Int, "16000", "minimum native sample rate in Hz (inclusive)"},
      {"corpus", "kaiser_beta", K::Float, "8.6", "resampler Kaiser window beta"},
      {"corpus", "resampler_taps", K::Int, "64", "resampler taps per polyphase branch"},

      {"captions", "backend", K::String, "none", "none | stub | http | command"},
      {"captions", "endpoint", K::String, "", "http backend: URL accepting the completion request JSON"},
      {"captions", "command", K::List, "", "command backend: argv of a line-oriented completion process"},
      {"captions", "stub_reply", K::String, "A sound is heard.", "stub backend: fixed completion"},
      {"captions", "timeout", K::Float, "30", "seconds per completion request"},
      {"captions", "max_retries", K::Int, "3", "attempts per clip before it is reported as failed"},
      {"captions", "max_tokens", K::Int, "64", "completion length limit"},
      {"captions", "temperature", K::Float, "0.7", "sampling temperature"},

      {"generation", "adapter", K::String, "noise", "noise (built-in test generator) | command"},
      {"generation", "command", K::List, "", "command adapter argv; job and status files are appended"},
      {"generation", "timeout", K::Float, "0", "seconds per adapter batch (0 = unlimited)"},
      {"generation", "tta_models", K::List, "G1,G2,G3,G4,G5", "models planned for text-to-audio"},
      {"generation", "ata_models", K::List, "G1,G2", "models planned for audio-to-audio"},
      {"generation", "noise_seconds", K::Float, "4.0", "noise adapter: output duration"},
      {"generation", "noise_rate", K::Int, "16000", "noise adapter: output sample rate"},

      {"splits", "train", K::Float, "0.70", "train share of each training source's reals"},
      {"splits", "valid", K::Float, "0.20", "validation share"},
      {"splits", "test", K::Float, "0.10", "test share"},

      {"features", "front_end", K::String, "logmel", "logmel (built-in) | embedding (files under paths.embedding_root)"},

      {"detector", "proj_dim", K::Int, "128", "projection width (frequency axis of the encoder map)"},
      {"detector", "enc_channels", K::List, "16,32,64,64", "channels of the four residual blocks"},
      {"detector", "gat_dim", K::Int, "64", "graph attention width"},
      {"detector", "n_hs_layers", K::Int, "2", "stacked heterogeneous graph attention layers"},
      {"detector", "leaky_slope", K::Float, "0.3", "leaky rectifier negative slope"},
      {"detector", "dropout", K::Float, "0.2", "readout dropout"},
      {"detector", "batch_size", K::Int, "32", "training batch size"},
      {"detector", "weight_decay", K::Float, "1e-4", "L2 weight decay folded into Adam"},
      {"detector", "lr_scratch", K::Float, "1e-3", "learning rate with the log-mel front-end"},
      {"detector", "lr_finetune", K::Float, "1e-5", "learning rate with embedding front-ends"},
      {"detector", "max_epochs", K::Int, "50", "epoch limit"},
      {"detector", "patience", K::Int, "5", "epochs without validation-loss improvement before stopping"},
      {"detector", "class_weighting", K::Bool, "false", "inverse-frequency class weights in the loss"},
      {"detector", "train_types", K::List, "TTA,ATA", "deepfake types whose Train/Valid sets are pooled"},

      {"eval", "breakdown", K::Bool, "false", "add monophonic/polyphonic EERs"},
      {"eval", "format", K::String, "markdown", "report rendering: markdown | tsv"},
  };
}

const char* kind_name(KeyKind k) {
  switch (k) {
    case K::Path: return "path";
    case K::String: return "string";
    case K::Int: return "int";
    case K::Float: return "float";
    case K::Bool: return "bool";
    case K::List: return "list";
  }
  return "?";
}

void validate(const KeySpec& s, const std::string& v) {
  const std::string where = "config " + s.dotted() + " = '" + v + "': ";
  switch (s.kind) {
    case K::Int: {
      long x = 0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
      if (ec != std::errc() || p != v.data() + v.size()) fail(ErrorKind::Config, where + "expected an integer");
      break;
    }
    case K::Float: {
      char* end = nullptr;
      std::strtod(v.c_str(), &end);
      if (v.empty() || end != v.c_str() + v.size()) fail(ErrorKind::Config, where + "expected a number");
      break;
    }
    case K::Bool:
      if (v != "true" && v != "false") fail(ErrorKind::Config, where + "expected true or false");
      break;
    default: break;
  }
}

}  // namespace

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = build_keys();
  return keys;
}

std::string describe_config_keys() {
  std::string out;
  std::string section;
  for (const auto& k : config_keys()) {
    if (k.section != section) {
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += "  " + k.key + " (" + kind_name(k.kind) + ", default '" + k.default_value + "'): " + k.help + "\n";
  }
  return out;
}

const KeySpec& RunConfig::spec(const std::string& dotted) const {
  for (const auto& k : config_keys())
    if (k.dotted() == dotted) return k;
  fail(ErrorKind::Config, "unknown config key '" + dotted + "'");
}

RunConfig RunConfig::load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides,
                          const std::map<std::string, std::string>& env) {
  RunConfig c;
  const std::filesystem::path cwd = std::filesystem::current_path();
  for (const auto& k : config_keys()) c.values_[k.dotted()] = {k.default_value, cwd};

  auto assign = [&c](const std::string& dotted, const std::string& value, const std::filesystem::path& base) {
    const KeySpec& s = c.spec(dotted);
    validate(s, value);
    c.values_[dotted] = {value, base};
  };

  if (file) {
    if (!std::filesystem::exists(*file)) fail(ErrorKind::Config, "config file " + file->string() + " not found");
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(file->string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      fail(ErrorKind::Config, std::string("cannot parse config: ") + e.what());
    }
    const auto base = std::filesystem::absolute(*file).parent_path();
    for (const auto& [section, body] : tree) {
      if (body.empty() && !body.data().empty())
        fail(ErrorKind::Config, "config key '" + section + "' must appear inside a [section]");
      for (const auto& [key, leaf] : body) assign(section + "." + key, trim(leaf.data()), base);
    }
  }
  for (const auto& k : config_keys()) {
    if (k.kind != K::Path) continue;
    std::string name = "ESDD_" + k.section + "_" + k.key;
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::toupper(ch); });
    auto it = env.find(name);
    if (it != env.end()) assign(k.dotted(), it->second, cwd);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Config, "override '" + o + "' is not section.key=value");
    assign(trim(o.substr(0, eq)), trim(o.substr(eq + 1)), cwd);
  }
  return c;
}

std::string RunConfig::get(const std::string& dotted) const {
  spec(dotted);
  return values_.at(dotted).text;
}

long RunConfig::get_int(const std::string& dotted) const { return std::stol(get(dotted)); }

double RunConfig::get_double(const std::string& dotted) const { return std::strtod(get(dotted).c_str(), nullptr); }

bool RunConfig::get_bool(const std::string& dotted) const { return get(dotted) == "true"; }

std::vector<std::string> RunConfig::get_list(const std::string& dotted) const {
  // Command lines split on whitespace; value lists on commas.
  const char sep = dotted.ends_with(".command") ? ' ' : ',';
  std::vector<std::string> out;
  for (const auto& part : split(get(dotted), sep)) {
    auto t = trim(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::filesystem::path RunConfig::resolve(const std::string& dotted, const std::filesystem::path& raw) const {
  if (raw.empty() || raw.is_absolute()) return raw;
  const auto& v = values_.at(dotted);
  if (spec(dotted).section == "paths" && dotted != "paths.work_dir") {
    return (get_path("paths.work_dir") / raw).lexically_normal();
  }
  return (v.base / raw).lexically_normal();
}

std::filesystem::path RunConfig::get_path(const std::string& dotted) const {
  return resolve(dotted, std::filesystem::path(get(dotted)));
}

std::string RunConfig::resolved_text() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    const auto& s = spec(k);
    out += k + " = " + (s.kind == K::Path ? get_path(k).string() : v.text) + "\n";
  }
  return out;
}

std::string RunConfig::hash() const {
  std::string canon;
  for (const auto& [k, v] : values_) {
    if (spec(k).kind == K::Path) continue;
    canon += k + "=" + v.text + "\n";
  }
  return hex64(fnv1a64(canon, 0xcbf29ce484222325ULL));
}

}  // namespace esdd
