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

#include "esdd/evalkit.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "esdd/error.hpp"
#include "esdd/util.hpp"

namespace esdd {

EerResult compute_eer(std::span<const double> real_scores, std::span<const double> fake_scores) {
  if (real_scores.empty() || fake_scores.empty()) {
    fail(ErrorKind::Argument, "EER needs at least one real and one fake score");
  }
  for (std::size_t i = 0; i < real_scores.size(); ++i) {
    if (!std::isfinite(real_scores[i])) fail(ErrorKind::Data, "non-finite real score at index " + std::to_string(i));
  }
  for (std::size_t i = 0; i < fake_scores.size(); ++i) {
    if (!std::isfinite(fake_scores[i])) fail(ErrorKind::Data, "non-finite fake score at index " + std::to_string(i));
  }
  std::vector<double> real(real_scores.begin(), real_scores.end());
  std::vector<double> fake(fake_scores.begin(), fake_scores.end());
  std::sort(real.begin(), real.end());
  std::sort(fake.begin(), fake.end());
  const double nr = static_cast<double>(real.size());
  const double nf = static_cast<double>(fake.size());

  std::size_t ri = 0, fi = 0;  // counts of real / fake strictly below t
  double prev_t = 0.0, prev_far = 1.0, prev_frr = 0.0;
  bool first = true;
  while (ri < real.size() || fi < fake.size()) {
    const double t = fi == fake.size() ? real[ri]
                   : ri == real.size() ? fake[fi]
                                       : std::min(real[ri], fake[fi]);
    const double far = static_cast<double>(fake.size() - fi) / nf;
    const double frr = static_cast<double>(ri) / nr;
    const double d = far - frr;
    if (!first && d <= 0.0) {
      const double prev_d = prev_far - prev_frr;
      if (d == 0.0) return {far, t};
      const double lambda = prev_d / (prev_d - d);
      return {prev_far + lambda * (far - prev_far), prev_t + lambda * (t - prev_t)};
    }
    first = false;
    prev_t = t;
    prev_far = far;
    prev_frr = frr;
    while (ri < real.size() && real[ri] == t) ++ri;
    while (fi < fake.size() && fake[fi] == t) ++fi;
  }
  // Past the largest score everything is rejected: FAR = 0, FRR = 1.
  const double prev_d = prev_far - prev_frr;
  const double lambda = prev_d / (prev_d + 1.0);
  return {prev_far + lambda * (0.0 - prev_far), prev_t};
}

std::string format_scores(const std::vector<ScoreRecord>& scores,
                          const std::vector<std::string>& provenance) {
  std::string out;
  for (const auto& p : provenance) out += "# " + p + "\n";
  char buf[64];
  for (const auto& s : scores) {
    std::snprintf(buf, sizeof(buf), "%.6f", s.score);
    out += s.clip_id + "\t" + buf + "\n";
  }
  return out;
}

void write_scores(const std::filesystem::path& path, const std::vector<ScoreRecord>& scores,
                  const std::vector<std::string>& provenance) {
  write_text_file(path, format_scores(scores, provenance));
}

std::map<std::string, double> read_scores(const std::filesystem::path& path) {
  std::map<std::string, double> out;
  std::size_t line_no = 0;
  for (auto line : split(read_text_file(path), '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 2) fail(ErrorKind::Data, path.string() + ":" + std::to_string(line_no) + ": expected clip_id<TAB>score");
    double v;
    try {
      v = std::stod(f[1]);
    } catch (const std::exception&) {
      fail(ErrorKind::Data, "clip " + f[0] + ": unparseable score '" + f[1] + "'");
    }
    if (!std::isfinite(v)) fail(ErrorKind::Data, "clip " + f[0] + ": non-finite score");
    if (!out.emplace(f[0], v).second) fail(ErrorKind::Data, "clip " + f[0] + ": duplicate score line");
  }
  return out;
}

std::vector<ConditionInput> load_condition_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorKind::Io, "condition directory " + dir.string() + " not found");
  std::vector<ConditionInput> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".tsv") continue;
    ConditionInput in;
    if (!parse_condition_file_name(entry.path().stem().string(), &in.condition, &in.deepfake_type)) continue;
    for (auto& r : read_manifest(entry.path()).records) {
      (r.label == Label::Real ? in.set.reals : in.set.fakes).push_back(std::move(r));
    }
    out.push_back(std::move(in));
  }
  std::sort(out.begin(), out.end(), [](const ConditionInput& a, const ConditionInput& b) {
    return std::pair(a.deepfake_type, a.condition) < std::pair(b.deepfake_type, b.condition);
  });
  return out;
}

namespace {

std::vector<double> lookup(const std::map<std::string, double>& scores, const std::vector<ClipRecord>& records,
                           std::optional<AudioType> only = std::nullopt) {
  std::vector<double> out;
  for (const auto& r : records) {
    if (only && r.audio_type != *only) continue;
    out.push_back(scores.at(r.clip_id));
  }
  return out;
}

}  // namespace

EvalReport evaluate(const std::map<std::string, double>& scores,
                    const std::vector<ConditionInput>& conditions, bool audio_type_breakdown) {
  std::vector<std::string> missing;
  std::set<std::string> used;
  for (const auto& c : conditions) {
    for (const auto* part : {&c.set.reals, &c.set.fakes}) {
      for (const auto& r : *part) {
        used.insert(r.clip_id);
        if (!scores.count(r.clip_id)) missing.push_back(r.clip_id);
      }
    }
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    const std::size_t total = missing.size();
    if (missing.size() > 20) missing.resize(20);
    fail(ErrorKind::Protocol, std::to_string(total) + " condition clip(s) have no score: " + join(missing, ", ") +
                                  (total > 20 ? ", ..." : ""));
  }
  std::size_t extra = 0;
  for (const auto& [id, s] : scores) extra += used.count(id) ? 0 : 1;
  if (extra) log_warn(std::to_string(extra) + " score(s) do not belong to any condition and were ignored");

  EvalReport report;
  for (const auto& c : conditions) {
    const ConditionSpec& spec = condition_spec(c.condition, c.deepfake_type);
    EvalEntry e;
    e.condition = c.condition;
    e.deepfake_type = c.deepfake_type;
    e.seen_sources = spec.seen_sources;
    e.seen_models = spec.seen_models;
    e.n_real = c.set.reals.size();
    e.n_fake = c.set.fakes.size();
    if (e.n_real == 0 || e.n_fake == 0) {
      log_warn("condition " + condition_file_name(c.condition, c.deepfake_type) + " lacks real or fake clips; skipped");
      continue;
    }
    const auto er = compute_eer(lookup(scores, c.set.reals), lookup(scores, c.set.fakes));
    e.eer_percent = 100.0 * er.eer;
    e.threshold = er.threshold;
    if (audio_type_breakdown) {
      for (AudioType at : {AudioType::Monophonic, AudioType::Polyphonic}) {
        auto rs = lookup(scores, c.set.reals, at);
        auto fs = lookup(scores, c.set.fakes, at);
        if (rs.empty() || fs.empty()) continue;
        const auto b = compute_eer(rs, fs);
        e.breakdowns.push_back({at, 100.0 * b.eer, b.threshold, rs.size(), fs.size()});
      }
    }
    report.entries.push_back(std::move(e));
  }
  compute_averages(report);
  return report;
}

void compute_averages(EvalReport& report) {
  report.averages.clear();
  for (DeepfakeType t : {DeepfakeType::TTA, DeepfakeType::ATA}) {
    AverageRow row{t};
    double sum = 0.0;
    for (const auto& e : report.entries) {
      if (e.deepfake_type != t || e.condition == ConditionName::Train || e.condition == ConditionName::Valid) continue;
      sum += e.eer_percent;
      ++row.n_conditions;
    }
    if (row.n_conditions == 0) continue;
    row.eer_percent = sum / static_cast<double>(row.n_conditions);
    report.averages.push_back(row);
  }
}

std::string format_percent(double percent) {
  // Half-up at two decimals; the nudge absorbs binary representation error
  // (7.165 is stored as 7.16499...).
  const double cents = std::floor(percent * 100.0 + 0.5 + 1e-7);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", cents / 100.0);
  return buf;
}

std::string render_report(const EvalReport& report, ReportFormat format) {
  using Row = std::vector<std::string>;
  std::vector<Row> main_rows;
  for (ConditionName c : kAllConditions) {
    const EvalEntry* by_type[2] = {nullptr, nullptr};
    for (const auto& e : report.entries) {
      if (e.condition == c) by_type[e.deepfake_type == DeepfakeType::TTA ? 0 : 1] = &e;
    }
    if (!by_type[0] && !by_type[1]) continue;
    const ConditionSpec& spec = condition_spec(c, DeepfakeType::TTA);
    main_rows.push_back({std::string(to_string(c)), spec.seen_sources ? "yes" : "no",
                         spec.seen_models ? "yes" : "no",
                         by_type[0] ? format_percent(by_type[0]->eer_percent) : "-",
                         by_type[1] ? format_percent(by_type[1]->eer_percent) : "-"});
  }
  if (!report.averages.empty()) {
    Row avg = {"Average", "-", "-", "-", "-"};
    for (const auto& a : report.averages) {
      avg[a.deepfake_type == DeepfakeType::TTA ? 3 : 4] = format_percent(a.eer_percent);
    }
    main_rows.push_back(avg);
  }
  std::vector<Row> breakdown_rows;
  for (const auto& e : report.entries) {
    if (e.breakdowns.empty()) continue;
    Row r = {std::string(to_string(e.condition)), std::string(to_string(e.deepfake_type)), "-", "-"};
    for (const auto& b : e.breakdowns) {
      r[b.audio_type == AudioType::Monophonic ? 2 : 3] = format_percent(b.eer_percent);
    }
    breakdown_rows.push_back(r);
  }

  const Row main_header = {"condition", "seen_sd", "seen_gm", "tta_eer", "ata_eer"};
  const Row breakdown_header = {"condition", "fake_type", "mono_eer", "poly_eer"};
  std::ostringstream out;
  auto emit = [&](const Row& header, const std::vector<Row>& rows) {
    if (format == ReportFormat::Tsv) {
      out << join(header, "\t") << '\n';
      for (const auto& r : rows) out << join(r, "\t") << '\n';
    } else {
      out << "| " << join(header, " | ") << " |\n|";
      for (std::size_t i = 0; i < header.size(); ++i) out << "---|";
      out << '\n';
      for (const auto& r : rows) out << "| " << join(r, " | ") << " |\n";
    }
  };
  if (format == ReportFormat::Markdown) out << "## EER (%)\n\n";
  emit(main_header, main_rows);
  if (!breakdown_rows.empty()) {
    out << '\n';
    if (format == ReportFormat::Markdown) out << "## EER (%) by audio type\n\n";
    emit(breakdown_header, breakdown_rows);
  }
  return out.str();
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : report.entries) {
    nlohmann::json je = {{"condition", to_string(e.condition)},
                         {"deepfake_type", to_string(e.deepfake_type)},
                         {"seen_sources", e.seen_sources},
                         {"seen_models", e.seen_models},
                         {"eer_percent", e.eer_percent},
                         {"threshold", e.threshold},
                         {"n_real", e.n_real},
                         {"n_fake", e.n_fake}};
    je["breakdowns"] = nlohmann::json::array();
    for (const auto& b : e.breakdowns) {
      je["breakdowns"].push_back({{"audio_type", to_string(b.audio_type)},
                                  {"eer_percent", b.eer_percent},
                                  {"threshold", b.threshold},
                                  {"n_real", b.n_real},
                                  {"n_fake", b.n_fake}});
    }
    j["entries"].push_back(je);
  }
  j["averages"] = nlohmann::json::array();
  for (const auto& a : report.averages) {
    j["averages"].push_back({{"deepfake_type", to_string(a.deepfake_type)},
                             {"eer_percent", a.eer_percent},
                             {"n_conditions", a.n_conditions}});
  }
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (!j.is_object()) fail(ErrorKind::Format, "report is not a JSON object");
  EvalReport r;
  try {
    for (const auto& je : j.at("entries")) {
      EvalEntry e;
      e.condition = parse_condition(je.at("condition").get<std::string>());
      e.deepfake_type = parse_deepfake_type(je.at("deepfake_type").get<std::string>());
      e.seen_sources = je.at("seen_sources").get<bool>();
      e.seen_models = je.at("seen_models").get<bool>();
      e.eer_percent = je.at("eer_percent").get<double>();
      e.threshold = je.at("threshold").get<double>();
      e.n_real = je.at("n_real").get<std::size_t>();
      e.n_fake = je.at("n_fake").get<std::size_t>();
      for (const auto& jb : je.at("breakdowns")) {
        e.breakdowns.push_back({parse_audio_type(jb.at("audio_type").get<std::string>()),
                                jb.at("eer_percent").get<double>(), jb.at("threshold").get<double>(),
                                jb.at("n_real").get<std::size_t>(), jb.at("n_fake").get<std::size_t>()});
      }
      r.entries.push_back(std::move(e));
    }
    for (const auto& ja : j.at("averages")) {
      r.averages.push_back({parse_deepfake_type(ja.at("deepfake_type").get<std::string>()),
                            ja.at("eer_percent").get<double>(), ja.at("n_conditions").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed report: ") + e.what());
  }
  return r;
}

}  // namespace esdd
