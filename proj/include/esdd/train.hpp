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
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "esdd/detector.hpp"
#include "esdd/evalkit.hpp"
#include "esdd/features.hpp"
#include "esdd/manifest.hpp"

namespace esdd {

struct LabeledFeatures {
  std::string clip_id;
  FeatureMatrix features;
  Label label = Label::Real;
};

// Loads features for every record through the front-end. Per-record failures
// are collected and raised together as Error(Data) naming each clip.
std::vector<LabeledFeatures> load_features(const std::vector<ClipRecord>& records, const FrontEnd& fe,
                                           const std::filesystem::path& manifest_dir, int jobs);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double valid_eer = 0.0;  // proportion
  double lr = 0.0;
  bool improved = false;

  bool operator==(const EpochRecord&) const = default;
};

// Stops once `patience` consecutive epochs pass without a strict decrease
// of the validation loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  // Returns true when training should stop after this epoch.
  bool update(std::size_t epoch, double valid_loss);
  bool last_improved() const { return last_improved_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_loss_ = 0.0;
  bool have_best_ = false;
  bool last_improved_ = false;
};

// Adam with L2 weight decay folded into the gradient.
class Adam {
 public:
  Adam(const ParamSet<float>& like, double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step(ParamSet<float>& p, const ParamSet<float>& grad);
  double lr() const { return lr_; }

 private:
  double lr_, wd_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

double learning_rate_for(const DetectorConfig& cfg, bool pretrained_front_end);

struct TrainOptions {
  double lr = 1e-3;
  int jobs = 1;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  ParamSet<float> params;  // best validation loss
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

// Both sets must be non-empty and contain both classes (Error(Data)).
// A non-finite loss raises Error(Numeric) naming epoch and batch.
TrainResult train_detector(const std::vector<LabeledFeatures>& train_set,
                           const std::vector<LabeledFeatures>& valid_set, const DetectorConfig& cfg,
                           const TrainOptions& opts);

std::string format_history(const std::vector<EpochRecord>& history, const std::vector<std::string>& provenance = {});

// Inference-mode scores in input order.
std::vector<ScoreRecord> score_features(const Detector<float>& det, const ParamSet<float>& p,
                                        const std::vector<LabeledFeatures>& set, int jobs);

// Loads, normalizes, and scores every record; output sorted by clip_id.
std::vector<ScoreRecord> score_set(const std::vector<ClipRecord>& records, const Detector<float>& det,
                                   const ParamSet<float>& p, const FrontEnd& fe, const NormStats& norm,
                                   const std::filesystem::path& manifest_dir, int jobs);

}  // namespace esdd
