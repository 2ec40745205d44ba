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

#include "esdd/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <set>

#include "esdd/captions.hpp"
#include "esdd/config.hpp"
#include "esdd/corpus.hpp"
#include "esdd/detector.hpp"
#include "esdd/error.hpp"
#include "esdd/evalkit.hpp"
#include "esdd/features.hpp"
#include "esdd/genpipe.hpp"
#include "esdd/manifest.hpp"
#include "esdd/splits.hpp"
#include "esdd/synthetic.hpp"
#include "esdd/train.hpp"
#include "esdd/util.hpp"

extern char** environ;

namespace esdd {

namespace {

struct Context {
  RunConfig cfg;
  std::string command;
  int jobs = 1;
  std::ostream& out;
  std::ostream& err;

  std::vector<std::string> provenance() const {
    return {std::string(kToolVersion) + " config=" + cfg.hash() + " command=" + command};
  }
  fs::path manifest_path() const { return cfg.get_path("paths.manifest"); }
  fs::path manifest_dir() const { return manifest_path().parent_path(); }
  std::uint64_t seed() const { return static_cast<std::uint64_t>(cfg.get_int("run.seed")); }
};

ResamplerParams resampler(const RunConfig& c) {
  ResamplerParams p;
  p.kaiser_beta = c.get_double("corpus.kaiser_beta");
  p.taps = static_cast<int>(c.get_int("corpus.resampler_taps"));
  return p;
}

std::vector<ModelId> models_from(const RunConfig& c, const std::string& key) {
  std::vector<ModelId> out;
  for (const auto& s : c.get_list(key)) {
    try {
      out.push_back(parse_model(s));
    } catch (const Error& e) {
      fail(ErrorKind::Config, key + ": " + e.what());
    }
  }
  return out;
}

void save_manifest(const Context& ctx, std::vector<ClipRecord> records) {
  sort_by_clip_id(records);
  write_manifest(ctx.manifest_path(), Manifest{std::move(records), ctx.provenance()});
}

void list_failures(std::ostream& err, const std::string& what, const std::vector<std::pair<std::string, std::string>>& f) {
  err << what << ": " << f.size() << " failure(s)\n";
  for (const auto& [id, msg] : f) err << "  " << id << ": " << msg << "\n";
}

FrontEnd make_front_end(const RunConfig& c) {
  FrontEndConfig fc;
  const std::string kind = c.get("features.front_end");
  if (kind == "logmel") {
    fc.kind = FrontEndKind::LogMel;
  } else if (kind == "embedding") {
    fc.kind = FrontEndKind::Embedding;
    fc.embedding_root = c.get_path("paths.embedding_root");
    if (fc.embedding_root.empty()) fail(ErrorKind::Config, "features.front_end = embedding needs paths.embedding_root");
  } else {
    fail(ErrorKind::Config, "features.front_end must be logmel or embedding, got '" + kind + "'");
  }
  return FrontEnd(fc);
}

DetectorConfig detector_config(const RunConfig& c) {
  DetectorConfig d;
  d.proj_dim = static_cast<std::size_t>(c.get_int("detector.proj_dim"));
  const auto ch = c.get_list("detector.enc_channels");
  if (ch.size() != 4) fail(ErrorKind::Config, "detector.enc_channels needs exactly four values");
  for (std::size_t i = 0; i < 4; ++i) d.enc_channels[i] = static_cast<std::size_t>(std::stoul(ch[i]));
  d.gat_dim = static_cast<std::size_t>(c.get_int("detector.gat_dim"));
  d.n_hs_layers = static_cast<std::size_t>(c.get_int("detector.n_hs_layers"));
  d.leaky_slope = static_cast<float>(c.get_double("detector.leaky_slope"));
  d.dropout = static_cast<float>(c.get_double("detector.dropout"));
  d.batch_size = static_cast<std::size_t>(c.get_int("detector.batch_size"));
  d.weight_decay = c.get_double("detector.weight_decay");
  d.lr_scratch = c.get_double("detector.lr_scratch");
  d.lr_finetune = c.get_double("detector.lr_finetune");
  d.max_epochs = static_cast<std::size_t>(c.get_int("detector.max_epochs"));
  d.patience = static_cast<std::size_t>(c.get_int("detector.patience"));
  d.class_weighting = c.get_bool("detector.class_weighting");
  d.seed = static_cast<std::uint64_t>(c.get_int("run.seed"));
  return d;
}

fs::path norm_path(const fs::path& ckpt) {
  fs::path p = ckpt;
  p += ".norm";
  return p;
}

// --- subcommands -----------------------------------------------------------

int cmd_build_manifest(Context& ctx) {
  const auto& c = ctx.cfg;
  std::vector<SourceConfig> sources;
  for (SourceId id : kAllSources) {
    std::string key(to_string(id));
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (!c.is_set("corpus." + key)) continue;
    SourceConfig s;
    s.id = id;
    s.root = c.get_path("corpus." + key);
    if (c.is_set("corpus." + key + "_include")) s.include_list = c.get_path("corpus." + key + "_include");
    s.filter = default_filter(id);
    s.filter.min_duration = c.get_double("corpus.min_duration");
    s.filter.min_sample_rate = static_cast<int>(c.get_int("corpus.min_sample_rate"));
    sources.push_back(std::move(s));
  }
  if (sources.empty()) fail(ErrorKind::Config, "no corpus roots configured (corpus.d1 ... corpus.d6)");
  BuildOptions opts;
  opts.audio_dir = c.get_path("paths.audio_dir");
  opts.manifest_dir = ctx.manifest_dir();
  opts.jobs = ctx.jobs;
  opts.resampler = resampler(c);
  BuildResult res = build_real_manifest(sources, opts);
  sort_by_clip_id(res.records);
  auto prov = ctx.provenance();
  prov.push_back(describe(opts.resampler));
  write_manifest(ctx.manifest_path(), Manifest{res.records, prov});

  std::string skips = "# " + ctx.provenance()[0] + "\npath\treason\n";
  for (const auto& s : res.skips) skips += s.path + "\t" + s.reason + "\n";
  fs::path skip_path = ctx.manifest_path();
  skip_path += ".skips.tsv";
  write_text_file(skip_path, skips);
  ctx.out << "build-manifest: " << res.records.size() << " clips, " << res.skips.size() << " files skipped\n";
  return kExitOk;
}

int cmd_caption(Context& ctx) {
  const auto& c = ctx.cfg;
  Manifest m = read_manifest(ctx.manifest_path());
  const std::string backend = c.get("captions.backend");
  const double timeout = c.get_double("captions.timeout");
  std::unique_ptr<TextGenClient> client;
  if (backend == "stub") {
    client = std::make_unique<StubTextGenClient>(c.get("captions.stub_reply"));
  } else if (backend == "http") {
    if (!c.is_set("captions.endpoint")) fail(ErrorKind::Config, "captions.backend = http needs captions.endpoint");
    client = std::make_unique<HttpTextGenClient>(c.get("captions.endpoint"), timeout);
  } else if (backend == "command") {
    auto argv = c.get_list("captions.command");
    if (argv.empty()) fail(ErrorKind::Config, "captions.backend = command needs captions.command");
    client = std::make_unique<SubprocessTextGenClient>(argv, timeout);
  } else if (backend != "none") {
    fail(ErrorKind::Config, "captions.backend must be none, stub, http or command");
  }
  CaptionCache cache(c.get_path("paths.caption_cache"));
  CaptionOptions opts;
  opts.max_retries = static_cast<int>(c.get_int("captions.max_retries"));
  opts.max_tokens = static_cast<int>(c.get_int("captions.max_tokens"));
  opts.temperature = c.get_double("captions.temperature");
  opts.parallelism = ctx.jobs;
  CaptionResult res = caption_manifest(std::move(m.records), client.get(), &cache, opts);
  save_manifest(ctx, res.records);
  ctx.out << "caption: " << res.generated << " generated, " << res.failures.size() << " failed\n";
  if (!res.failures.empty()) {
    std::vector<std::pair<std::string, std::string>> f;
    for (const auto& x : res.failures) f.emplace_back(x.clip_id, x.error);
    list_failures(ctx.err, "caption", f);
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_plan_gen(Context& ctx) {
  const auto& c = ctx.cfg;
  Manifest m = read_manifest(ctx.manifest_path());
  std::vector<ClipRecord> reals;
  for (const auto& r : m.records)
    if (r.label == Label::Real) reals.push_back(r);
  PlanOptions opts;
  opts.master_seed = ctx.seed();
  opts.raw_dir = c.get_path("paths.raw_dir");
  opts.manifest_dir = ctx.manifest_dir();
  std::vector<GenJob> jobs;
  std::size_t n_tta = 0, n_ata = 0;
  if (auto tta = models_from(c, "generation.tta_models"); !tta.empty()) {
    auto j = plan_jobs(reals, tta, DeepfakeType::TTA, opts);
    n_tta = j.size();
    jobs.insert(jobs.end(), j.begin(), j.end());
  }
  if (auto ata = models_from(c, "generation.ata_models"); !ata.empty()) {
    auto j = plan_jobs(reals, ata, DeepfakeType::ATA, opts);
    n_ata = j.size();
    jobs.insert(jobs.end(), j.begin(), j.end());
  }
  write_jobs(c.get_path("paths.jobs_file"), jobs, ctx.provenance());
  ctx.out << "plan-gen: " << n_tta << " TTA jobs, " << n_ata << " ATA jobs\n";
  return kExitOk;
}

int cmd_run_gen(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto jobs = read_jobs(c.get_path("paths.jobs_file"));
  Manifest m = read_manifest(ctx.manifest_path());
  std::map<std::string, ClipRecord> parents;
  for (const auto& r : m.records)
    if (r.label == Label::Real) parents[r.clip_id] = r;

  std::unique_ptr<GeneratorAdapter> adapter;
  const std::string kind = c.get("generation.adapter");
  if (kind == "noise") {
    adapter = std::make_unique<NoiseAdapter>(c.get_double("generation.noise_seconds"),
                                             static_cast<int>(c.get_int("generation.noise_rate")));
  } else if (kind == "command") {
    auto argv = c.get_list("generation.command");
    if (argv.empty()) fail(ErrorKind::Config, "generation.adapter = command needs generation.command");
    adapter = std::make_unique<ProcessAdapter>(argv, c.get_double("generation.timeout"));
  } else {
    fail(ErrorKind::Config, "generation.adapter must be noise or command");
  }
  RunOptions opts;
  opts.ledger = c.get_path("paths.ledger");
  opts.audio_dir = c.get_path("paths.fake_audio_dir");
  opts.manifest_dir = ctx.manifest_dir();
  opts.work_dir = c.get_path("paths.gen_work_dir");
  opts.parallelism = ctx.jobs;
  opts.resampler = resampler(c);
  RunResult res = run_jobs(jobs, *adapter, parents, opts);

  std::set<std::string> fresh;
  for (const auto& r : res.records) fresh.insert(r.clip_id);
  std::vector<ClipRecord> merged;
  for (auto& r : m.records)
    if (!fresh.count(r.clip_id)) merged.push_back(std::move(r));
  merged.insert(merged.end(), res.records.begin(), res.records.end());
  save_manifest(ctx, std::move(merged));
  ctx.out << "run-gen: " << res.records.size() << " fakes (" << res.reused << " reused), " << res.failures.size()
          << " failed\n";
  if (!res.failures.empty()) {
    std::vector<std::pair<std::string, std::string>> f;
    for (const auto& x : res.failures) f.emplace_back(x.job_id, x.error);
    list_failures(ctx.err, "run-gen", f);
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_verify(Context& ctx) {
  const Manifest m = read_manifest(ctx.manifest_path());
  const auto issues = check_manifest(m.records);
  for (const auto& i : issues) ctx.err << "manifest: " << i << "\n";
  const fs::path base = ctx.manifest_path().parent_path();
  std::size_t missing = 0;
  for (const auto& r : m.records) {
    if (fs::exists(base / r.path)) continue;
    ctx.err << "missing audio: " << r.clip_id << " (" << (base / r.path).string() << ")\n";
    ++missing;
  }
  const ProvenanceReport rep = verify_provenance(m.records);
  ctx.out << format_provenance(rep);
  if (missing) ctx.out << "missing audio files: " << missing << "\n";
  return rep.ok() && issues.empty() && missing == 0 ? kExitOk : kExitData;
}

int cmd_split(Context& ctx) {
  const auto& c = ctx.cfg;
  Manifest m = read_manifest(ctx.manifest_path());
  SplitRatios ratios{c.get_double("splits.train"), c.get_double("splits.valid"), c.get_double("splits.test")};
  auto records = assign_splits(std::move(m.records), ratios, ctx.seed());
  save_manifest(ctx, records);

  const fs::path dir = c.get_path("paths.conditions_dir");
  fs::create_directories(dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    ConditionName n;
    DeepfakeType t;
    if (entry.path().extension() == ".tsv" && parse_condition_file_name(entry.path().stem().string(), &n, &t))
      fs::remove(entry.path());
  }
  std::string specs = "# " + ctx.provenance()[0] + "\n";
  for (DeepfakeType type : {DeepfakeType::TTA, DeepfakeType::ATA}) {
    for (ConditionName name : kAllConditions) {
      const ConditionSpec& spec = condition_spec(name, type);
      specs += format_condition_spec(spec);
      ConditionSet set = materialize(records, spec);
      if (set.reals.empty() || set.fakes.empty()) continue;
      std::vector<ClipRecord> rows = std::move(set.reals);
      rows.insert(rows.end(), set.fakes.begin(), set.fakes.end());
      const std::size_t n_fake = set.fakes.size();
      const std::size_t n_real = rows.size() - n_fake;
      write_manifest(dir / condition_file_name(name, type), Manifest{std::move(rows), ctx.provenance()});
      ctx.out << "split: " << condition_file_name(name, type) << " " << n_real << " real, " << n_fake << " fake\n";
    }
  }
  write_text_file(dir / "conditions.ini", specs);
  return kExitOk;
}

// Pooled condition sets of the configured deepfake types, deduplicated.
std::vector<ClipRecord> pooled(const std::vector<ClipRecord>& records, ConditionName name,
                               const std::vector<DeepfakeType>& types) {
  std::map<std::string, ClipRecord> byid;
  for (DeepfakeType t : types) {
    ConditionSet s = materialize(records, condition_spec(name, t));
    for (auto& r : s.reals) byid.emplace(r.clip_id, std::move(r));
    for (auto& r : s.fakes) byid.emplace(r.clip_id, std::move(r));
  }
  std::vector<ClipRecord> out;
  for (auto& [id, r] : byid) out.push_back(std::move(r));
  return out;
}

void normalize_all(std::vector<LabeledFeatures>& set, const NormStats& stats) {
  for (auto& s : set) apply_norm(s.features, stats);
}

int cmd_train(Context& ctx) {
  const auto& c = ctx.cfg;
  const Manifest m = read_manifest(ctx.manifest_path());
  std::vector<DeepfakeType> types;
  for (const auto& t : c.get_list("detector.train_types")) {
    const DeepfakeType d = parse_deepfake_type(t);
    if (d == DeepfakeType::None) fail(ErrorKind::Config, "detector.train_types accepts TTA and ATA");
    types.push_back(d);
  }
  if (types.empty()) fail(ErrorKind::Config, "detector.train_types is empty");
  const auto train_records = pooled(m.records, ConditionName::Train, types);
  const auto valid_records = pooled(m.records, ConditionName::Valid, types);
  const FrontEnd fe = make_front_end(c);
  auto train_set = load_features(train_records, fe, ctx.manifest_dir(), ctx.jobs);
  auto valid_set = load_features(valid_records, fe, ctx.manifest_dir(), ctx.jobs);
  if (train_set.empty() || valid_set.empty()) fail(ErrorKind::Data, "train and valid sets must be non-empty");

  std::vector<FeatureMatrix> mats;
  mats.reserve(train_set.size());
  for (auto& s : train_set) mats.push_back(std::move(s.features));
  const NormStats norm = compute_norm_stats(mats);
  for (std::size_t i = 0; i < train_set.size(); ++i) train_set[i].features = std::move(mats[i]);
  normalize_all(train_set, norm);
  normalize_all(valid_set, norm);

  DetectorConfig dc = detector_config(c);
  dc.input_dim = train_set.front().features.dims;
  dc.front_end_id = norm.front_end_id;
  TrainOptions opts;
  opts.lr = learning_rate_for(dc, fe.pretrained());
  opts.jobs = ctx.jobs;
  opts.on_epoch = [](const EpochRecord& r) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "epoch %zu train_loss %.4f valid_loss %.4f valid_eer %.4f%s", r.epoch, r.train_loss,
                  r.valid_loss, r.valid_eer, r.improved ? " *" : "");
    log_info(buf);
  };
  log_info("train: " + std::to_string(train_set.size()) + " clips, valid: " + std::to_string(valid_set.size()) +
           " clips, lr " + std::to_string(opts.lr));
  const TrainResult res = train_detector(train_set, valid_set, dc, opts);

  const fs::path ckpt = c.get_path("paths.checkpoint");
  save_checkpoint(ckpt, dc, res.params);
  write_norm_stats(norm_path(ckpt), norm);
  write_text_file(c.get_path("paths.history"), format_history(res.history, ctx.provenance()));
  const auto& best = res.history.at(res.best_epoch - 1);
  char buf[256];
  std::snprintf(buf, sizeof buf, "train: %zu epochs, best epoch %zu (valid_loss %.4f, valid_eer %.4f)%s\n",
                res.history.size(), res.best_epoch, best.valid_loss, best.valid_eer,
                res.stopped_early ? ", stopped early" : "");
  ctx.out << buf;
  return kExitOk;
}

int cmd_score(Context& ctx) {
  const auto& c = ctx.cfg;
  const fs::path ckpt = c.get_path("paths.checkpoint");
  DetectorConfig dc;
  const ParamSet<float> params = load_checkpoint(ckpt, &dc);
  const NormStats norm = read_norm_stats(norm_path(ckpt));
  const Detector<float> det(dc);
  const FrontEnd fe = make_front_end(c);

  std::set<std::string> wanted;
  for (const auto& in : load_condition_dir(c.get_path("paths.conditions_dir"))) {
    if (in.condition == ConditionName::Train) continue;
    for (const auto* part : {&in.set.reals, &in.set.fakes})
      for (const auto& r : *part) wanted.insert(r.clip_id);
  }
  if (wanted.empty()) fail(ErrorKind::Data, "no evaluation clips found; run split first");
  // Audio paths are taken from the manifest so they resolve against its directory.
  std::vector<ClipRecord> records;
  for (auto& r : read_manifest(ctx.manifest_path()).records)
    if (wanted.erase(r.clip_id)) records.push_back(std::move(r));
  if (!wanted.empty())
    fail(ErrorKind::Data, "condition files name " + std::to_string(wanted.size()) +
                              " clip(s) absent from the manifest, e.g. " + *wanted.begin());
  const auto scores = score_set(records, det, params, fe, norm, ctx.manifest_dir(), ctx.jobs);
  write_scores(c.get_path("paths.scores"), scores, ctx.provenance());
  ctx.out << "score: " << scores.size() << " clips\n";
  return kExitOk;
}

std::string with_provenance(const std::string& json_text, const std::vector<std::string>& prov) {
  auto j = nlohmann::json::parse(json_text);
  j["provenance"] = prov;
  return j.dump(2) + "\n";
}

std::string rendered(const EvalReport& rep, const std::string& format, const std::vector<std::string>& prov) {
  if (format == "tsv") return "# " + prov[0] + "\n" + render_report(rep, ReportFormat::Tsv);
  if (format == "markdown") return "<!-- " + prov[0] + " -->\n" + render_report(rep, ReportFormat::Markdown);
  fail(ErrorKind::Config, "eval.format must be markdown or tsv");
}

int cmd_eval(Context& ctx) {
  const auto& c = ctx.cfg;
  auto scores = read_scores(c.get_path("paths.scores"));
  std::vector<ConditionInput> conds;
  for (auto& in : load_condition_dir(c.get_path("paths.conditions_dir"))) {
    if (in.condition == ConditionName::Train || in.condition == ConditionName::Valid) {
      // score also covers validation clips; they are not part of the report.
      for (const auto* part : {&in.set.reals, &in.set.fakes})
        for (const auto& r : *part) scores.erase(r.clip_id);
      continue;
    }
    conds.push_back(std::move(in));
  }
  if (conds.empty()) fail(ErrorKind::Data, "no test conditions found; run split first");
  const EvalReport rep = evaluate(scores, conds, c.get_bool("eval.breakdown"));
  write_text_file(c.get_path("paths.report"), with_provenance(report_to_json(rep), ctx.provenance()));
  ctx.out << rendered(rep, c.get("eval.format"), ctx.provenance());
  return kExitOk;
}

int cmd_report(Context& ctx, const std::string& out_file) {
  const auto& c = ctx.cfg;
  const EvalReport rep = report_from_json(read_text_file(c.get_path("paths.report")));
  const std::string text = rendered(rep, c.get("eval.format"), ctx.provenance());
  if (out_file.empty()) {
    ctx.out << text;
  } else {
    write_text_file(out_file, text);
  }
  return kExitOk;
}

int cmd_synth(Context& ctx, const std::string& out_dir, SyntheticOptions o) {
  o.seed = ctx.seed();
  if (o.n_real == 0 || o.seconds <= 0.0 || o.sample_rate <= 0) fail(ErrorKind::Config, "synth: sizes must be positive");
  write_synthetic_source(out_dir, o);
  ctx.out << "synth: " << o.n_real << " tone clips under " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

std::map<std::string, std::string> esdd_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    std::string_view kv(*e);
    if (!kv.starts_with("ESDD_")) continue;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    env.emplace(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
  }
  return env;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::map<std::string, std::string>& env) {
  CLI::App app{"Environmental sound deepfake detection benchmark toolkit", "esdd"};
  app.footer("Configuration keys (INI sections; override with --set section.key=value):\n" + describe_config_keys() +
             "Path keys also read ESDD_<SECTION>_<KEY> from the environment.\n"
             "Exit codes: 0 ok, 2 config error, 3 data or protocol error, 4 partial completion.");
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  std::vector<std::string> sets;
  int jobs = 0;
  bool quiet = false;
  app.add_option("-c,--config", config_file, "INI configuration file");
  app.add_option("--set", sets, "override a key: section.key=value (repeatable)");
  app.add_option("-j,--jobs", jobs, "worker threads (default run.jobs)");
  app.add_flag("-q,--quiet", quiet, "suppress informational logging");
  app.add_flag_callback(
      "--version",
      [&out]() {
        out << kToolVersion << "\n";
        throw CLI::Success();
      },
      "print the version and exit");

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"build-manifest", "ingest source corpora into 4 s 16 kHz clips and a manifest"},
      {"caption", "fill missing captions through the configured text generator"},
      {"plan-gen", "write the generation job plan for every real clip"},
      {"run-gen", "run planned jobs through the adapter and add fakes to the manifest"},
      {"verify", "check manifest integrity and real/fake provenance"},
      {"split", "assign partitions and materialize the condition sets"},
      {"train", "train the detector on the pooled Train/Valid sets"},
      {"score", "score every evaluation clip with the trained detector"},
      {"eval", "compute per-condition EERs and write the report"},
      {"report", "render a saved report as markdown or TSV"},
      {"synth", "write the bundled tones-as-real synthetic source corpus"},
  };
  std::map<std::string, CLI::App*> cmds;
  for (const auto& s : subs) cmds[s.name] = app.add_subcommand(s.name, s.help);
  std::string report_out, synth_out;
  SyntheticOptions synth;
  cmds["report"]->add_option("-o,--out", report_out, "write to a file instead of stdout");
  cmds["synth"]->add_option("-o,--out", synth_out, "output corpus root")->required();
  cmds["synth"]->add_option("-n,--n-real", synth.n_real, "number of tone clips")->capture_default_str();
  cmds["synth"]->add_option("--seconds", synth.seconds, "clip length")->capture_default_str();
  cmds["synth"]->add_option("--rate", synth.sample_rate, "sample rate in Hz")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    // Help and --version come through here with exit code 0.
    return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
  }

  std::string command;
  for (const auto& [name, sub] : cmds)
    if (sub->parsed()) command = name;

  set_log_quiet(quiet);
  try {
    std::optional<fs::path> file;
    if (!config_file.empty()) file = config_file;
    Context ctx{RunConfig::load(file, sets, env), command, 1, out, err};
    ctx.jobs = jobs > 0 ? jobs : static_cast<int>(ctx.cfg.get_int("run.jobs"));
    if (ctx.jobs < 1) fail(ErrorKind::Config, "run.jobs must be at least 1");
    log_info("esdd " + command + " config=" + ctx.cfg.hash() + "\n" + ctx.cfg.resolved_text());

    if (command == "build-manifest") return cmd_build_manifest(ctx);
    if (command == "caption") return cmd_caption(ctx);
    if (command == "plan-gen") return cmd_plan_gen(ctx);
    if (command == "run-gen") return cmd_run_gen(ctx);
    if (command == "verify") return cmd_verify(ctx);
    if (command == "split") return cmd_split(ctx);
    if (command == "train") return cmd_train(ctx);
    if (command == "score") return cmd_score(ctx);
    if (command == "eval") return cmd_eval(ctx);
    if (command == "report") return cmd_report(ctx, report_out);
    if (command == "synth") return cmd_synth(ctx, synth_out, synth);
    fail(ErrorKind::Config, "unknown command");
  } catch (const Error& e) {
    err << "esdd " << command << ": " << error_kind_name(e.kind()) << " error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "esdd " << command << ": " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace esdd
