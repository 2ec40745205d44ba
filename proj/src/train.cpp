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

#include "esdd/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>

#include "esdd/error.hpp"
#include "esdd/hash.hpp"

namespace esdd {

namespace {

void raise_collected(const std::vector<std::string>& errors, const std::string& what) {
  std::vector<std::string> named;
  for (const auto& e : errors)
    if (!e.empty()) named.push_back(e);
  if (named.empty()) return;
  std::string msg = std::to_string(named.size()) + " record(s) failed during " + what + ":";
  for (std::size_t i = 0; i < named.size() && i < 20; ++i) msg += "\n  " + named[i];
  if (named.size() > 20) msg += "\n  ...";
  fail(ErrorKind::Data, msg);
}

void require_both_classes(const std::vector<LabeledFeatures>& set, const char* name) {
  if (set.empty()) fail(ErrorKind::Data, std::string(name) + " set is empty");
  bool real = false, fake = false;
  for (const auto& s : set) (s.label == Label::Real ? real : fake) = true;
  if (!real || !fake) fail(ErrorKind::Data, std::string(name) + " set must contain both real and fake clips");
}

ParamSet<float> zeros_like(const ParamSet<float>& p) {
  ParamSet<float> z;
  for (const auto& t : p.tensors) z.tensors.push_back({t.name, t.shape, std::vector<float>(t.data.size(), 0.0f)});
  return z;
}

double sample_loss(const std::array<float, 2>& l, std::size_t y) {
  const double a = l[0], b = l[1];
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m)) - (y == 0 ? a : b);
}

struct EvalOut {
  double loss;
  double eer;
};

EvalOut evaluate_set(const Detector<float>& det, const ParamSet<float>& p, const std::vector<LabeledFeatures>& set,
                     const std::array<double, 2>& w, int jobs) {
  std::vector<std::array<float, 2>> logits(set.size());
  parallel_for(set.size(), jobs, [&](std::size_t i) { logits[i] = det.forward(p, set[i].features).logits; });
  double total = 0.0, weight = 0.0;
  std::vector<double> real, fake;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::size_t y = class_index(set[i].label);
    total += w[y] * sample_loss(logits[i], y);
    weight += w[y];
    const double score = double(logits[i][kRealClass]) - double(logits[i][kFakeClass]);
    (set[i].label == Label::Real ? real : fake).push_back(score);
  }
  const double loss = total / weight;
  if (!std::isfinite(loss)) fail(ErrorKind::Numeric, "non-finite validation loss");
  return {loss, compute_eer(real, fake).eer};
}

}  // namespace

std::vector<LabeledFeatures> load_features(const std::vector<ClipRecord>& records, const FrontEnd& fe,
                                           const std::filesystem::path& manifest_dir, int jobs) {
  std::vector<LabeledFeatures> out(records.size());
  std::vector<std::string> errors(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    try {
      out[i].clip_id = records[i].clip_id;
      out[i].label = records[i].label;
      out[i].features = fe.load(records[i], manifest_dir);
    } catch (const std::exception& e) {
      errors[i] = records[i].clip_id + ": " + e.what();
    }
  });
  raise_collected(errors, "feature loading");
  return out;
}

bool EarlyStopping::update(std::size_t epoch, double valid_loss) {
  if (!have_best_ || valid_loss < best_loss_) {
    have_best_ = true;
    best_loss_ = valid_loss;
    best_epoch_ = epoch;
    since_best_ = 0;
    last_improved_ = true;
    return false;
  }
  last_improved_ = false;
  ++since_best_;
  return since_best_ >= patience_;
}

Adam::Adam(const ParamSet<float>& like, double lr, double weight_decay, double beta1, double beta2, double eps)
    : lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
  for (const auto& t : like.tensors) {
    m_.emplace_back(t.data.size(), 0.0);
    v_.emplace_back(t.data.size(), 0.0);
  }
}

void Adam::step(ParamSet<float>& p, const ParamSet<float>& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, double(t_));
  const double c2 = 1.0 - std::pow(b2_, double(t_));
  for (std::size_t ti = 0; ti < p.tensors.size(); ++ti) {
    auto& w = p.tensors[ti].data;
    const auto& g = grad.tensors[ti].data;
    auto& m = m_[ti];
    auto& v = v_[ti];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = double(g[i]) + wd_ * double(w[i]);
      m[i] = b1_ * m[i] + (1.0 - b1_) * gi;
      v[i] = b2_ * v[i] + (1.0 - b2_) * gi * gi;
      const double mh = m[i] / c1, vh = v[i] / c2;
      w[i] = static_cast<float>(double(w[i]) - lr_ * mh / (std::sqrt(vh) + eps_));
    }
  }
}

double learning_rate_for(const DetectorConfig& cfg, bool pretrained_front_end) {
  return pretrained_front_end ? cfg.lr_finetune : cfg.lr_scratch;
}

TrainResult train_detector(const std::vector<LabeledFeatures>& train_set,
                           const std::vector<LabeledFeatures>& valid_set, const DetectorConfig& cfg,
                           const TrainOptions& opts) {
  require_both_classes(train_set, "training");
  require_both_classes(valid_set, "validation");
  if (cfg.batch_size < 1) fail(ErrorKind::Config, "batch_size must be positive");

  const Detector<float> det(cfg);
  ParamSet<float> params = det.init_params(splitmix_seed(cfg.seed, 0));
  Adam adam(params, opts.lr, cfg.weight_decay);

  std::array<double, 2> w = {1.0, 1.0};
  if (cfg.class_weighting) {
    std::array<double, 2> n = {0.0, 0.0};
    for (const auto& s : train_set) n[class_index(s.label)] += 1.0;
    const double total = n[0] + n[1];
    for (std::size_t k = 0; k < 2; ++k) w[k] = total / (2.0 * n[k]);
  }

  const std::size_t B = cfg.batch_size;
  std::vector<ParamSet<float>> per_sample(std::min(B, train_set.size()), zeros_like(params));
  std::vector<double> sample_losses(per_sample.size());
  ParamSet<float> batch_grad = zeros_like(params);

  TrainResult res;
  res.params = params;
  EarlyStopping stopper(cfg.patience);
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(splitmix_seed(cfg.seed, 1000003 + epoch));
    shuffle_rng.shuffle(order);
    const std::uint64_t epoch_seed = splitmix_seed(cfg.seed, 2000003 + epoch);

    double loss_sum = 0.0, weight_sum = 0.0;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += B, ++batch) {
      const std::size_t n = std::min(B, order.size() - start);
      double batch_weight = 0.0;
      for (std::size_t k = 0; k < n; ++k) batch_weight += w[class_index(train_set[order[start + k]].label)];

      parallel_for(n, opts.jobs, [&](std::size_t k) {
        const auto& s = train_set[order[start + k]];
        Rng drop(splitmix_seed(epoch_seed, order[start + k]));
        CachePtr<float> cache;
        const auto out = det.forward(params, s.features, &drop, &cache);
        const std::size_t y = class_index(s.label);
        sample_losses[k] = sample_loss(out.logits, y);
        const double m = std::max(out.logits[0], out.logits[1]);
        const double e0 = std::exp(double(out.logits[0]) - m), e1 = std::exp(double(out.logits[1]) - m);
        std::array<float, 2> dl = {float(e0 / (e0 + e1)), float(e1 / (e0 + e1))};
        dl[y] -= 1.0f;
        const float scale = static_cast<float>(w[y] / batch_weight);
        dl[0] *= scale;
        dl[1] *= scale;
        per_sample[k].zero();
        det.backward(params, *cache, dl, per_sample[k]);
      });

      for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(sample_losses[k]))
          fail(ErrorKind::Numeric, "non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                       std::to_string(batch) + " (clip " + train_set[order[start + k]].clip_id + ")");
        const double wy = w[class_index(train_set[order[start + k]].label)];
        loss_sum += wy * sample_losses[k];
        weight_sum += wy;
      }
      // Fixed-order reduction keeps results independent of the worker count.
      batch_grad.zero();
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t ti = 0; ti < batch_grad.tensors.size(); ++ti) {
          auto& dst = batch_grad.tensors[ti].data;
          const auto& src = per_sample[k].tensors[ti].data;
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
      adam.step(params, batch_grad);
      if (!params.all_finite())
        fail(ErrorKind::Numeric, "non-finite parameters after the optimizer step at epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(batch));
    }

    const EvalOut v = evaluate_set(det, params, valid_set, w, opts.jobs);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / weight_sum;
    rec.valid_loss = v.loss;
    rec.valid_eer = v.eer;
    rec.lr = adam.lr();
    const bool stop = stopper.update(epoch, v.loss);
    rec.improved = stopper.last_improved();
    if (rec.improved) {
      res.params = params;
      res.best_epoch = epoch;
    }
    res.history.push_back(rec);
    if (opts.on_epoch) opts.on_epoch(rec);
    if (stop) {
      res.stopped_early = true;
      break;
    }
  }
  return res;
}

std::string format_history(const std::vector<EpochRecord>& history, const std::vector<std::string>& provenance) {
  std::string out;
  for (const auto& p : provenance) out += "# " + p + "\n";
  out += "epoch\ttrain_loss\tvalid_loss\tvalid_eer\tlr\timproved\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%.6f\t%g\t%s\n", r.epoch, r.train_loss, r.valid_loss, r.valid_eer,
                  r.lr, r.improved ? "yes" : "no");
    out += buf;
  }
  return out;
}

std::vector<ScoreRecord> score_features(const Detector<float>& det, const ParamSet<float>& p,
                                        const std::vector<LabeledFeatures>& set, int jobs) {
  std::vector<ScoreRecord> out(set.size());
  std::vector<std::string> errors(set.size());
  parallel_for(set.size(), jobs, [&](std::size_t i) {
    out[i].clip_id = set[i].clip_id;
    try {
      out[i].score = det.forward(p, set[i].features).score;
      if (!std::isfinite(out[i].score)) errors[i] = set[i].clip_id + ": non-finite score";
    } catch (const std::exception& e) {
      errors[i] = set[i].clip_id + ": " + e.what();
    }
  });
  raise_collected(errors, "scoring");
  return out;
}

std::vector<ScoreRecord> score_set(const std::vector<ClipRecord>& records, const Detector<float>& det,
                                   const ParamSet<float>& p, const FrontEnd& fe, const NormStats& norm,
                                   const std::filesystem::path& manifest_dir, int jobs) {
  std::vector<ScoreRecord> out(records.size());
  std::vector<std::string> errors(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    out[i].clip_id = records[i].clip_id;
    try {
      FeatureMatrix f = fe.load(records[i], manifest_dir);
      if (f.front_end_id != norm.front_end_id)
        fail(ErrorKind::Feature, "front-end '" + f.front_end_id + "' does not match the model's '" +
                                     norm.front_end_id + "'");
      apply_norm(f, norm);
      out[i].score = det.forward(p, f).score;
      if (!std::isfinite(out[i].score)) errors[i] = records[i].clip_id + ": non-finite score";
    } catch (const std::exception& e) {
      errors[i] = records[i].clip_id + ": " + e.what();
    }
  });
  raise_collected(errors, "scoring");
  std::sort(out.begin(), out.end(), [](const ScoreRecord& a, const ScoreRecord& b) { return a.clip_id < b.clip_id; });
  return out;
}

}  // namespace esdd
