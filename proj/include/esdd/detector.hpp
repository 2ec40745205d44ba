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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "esdd/features.hpp"
#include "esdd/types.hpp"
#include "esdd/util.hpp"

namespace esdd {

// Class indices of the two logits.
inline constexpr std::size_t kFakeClass = 0;
inline constexpr std::size_t kRealClass = 1;

struct DetectorConfig {
  std::size_t input_dim = 64;
  std::size_t proj_dim = 128;
  std::array<std::size_t, 4> enc_channels = {16, 32, 64, 64};
  std::size_t gat_dim = 64;
  std::size_t n_hs_layers = 2;
  float leaky_slope = 0.3f;
  float dropout = 0.2f;
  std::size_t batch_size = 32;
  double weight_decay = 1e-4;
  double lr_scratch = 1e-3;
  double lr_finetune = 1e-5;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  bool class_weighting = false;  // inverse-frequency loss weights
  std::string front_end_id;      // echoed into checkpoints

  bool operator==(const DetectorConfig&) const = default;
};

std::string config_to_json(const DetectorConfig& cfg);
DetectorConfig config_from_json(const std::string& text);

// Number of spectral nodes after the three 2x2 pooling stages.
std::size_t spectral_node_count(const DetectorConfig& cfg);
std::size_t temporal_node_count(std::size_t frames);

template <typename T>
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> data;
};

template <typename T>
struct ParamSet {
  std::vector<Tensor<T>> tensors;

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.data.size();
    return n;
  }
  void zero() {
    for (auto& t : tensors) std::fill(t.data.begin(), t.data.end(), T(0));
  }
  bool all_finite() const;
  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& t : tensors) {
      out.tensors.push_back({t.name, t.shape, std::vector<U>(t.data.begin(), t.data.end())});
    }
    return out;
  }
};

template <typename T>
struct DetectorOutput {
  std::array<T, 2> logits{};
  T score{};  // logits[real] - logits[fake]
  std::size_t spectral_nodes = 0;
  std::size_t temporal_nodes = 0;
};

template <typename T>
struct ForwardCache;

template <typename T>
struct CacheDeleter {
  void operator()(ForwardCache<T>* c) const;
};

template <typename T>
using CachePtr = std::unique_ptr<ForwardCache<T>, CacheDeleter<T>>;

// Residual conv encoder over the projected feature map, self-attention
// aggregation of spectral and temporal nodes, stacked heterogeneous graph
// attention with a master node, and a two-class readout.
template <typename T>
class Detector {
 public:
  explicit Detector(const DetectorConfig& cfg);

  const DetectorConfig& config() const { return cfg_; }

  // Deterministic in cfg and seed. Biases start at zero.
  ParamSet<T> init_params(std::uint64_t seed) const;

  // Inference when dropout_rng is null. Throws Error(Shape) when the input
  // width differs from cfg.input_dim or T < 1.
  DetectorOutput<T> forward(const ParamSet<T>& p, const FeatureMatrix& x, Rng* dropout_rng = nullptr,
                            CachePtr<T>* cache = nullptr) const;

  // Accumulates d(loss)/d(params) into grads given d(loss)/d(logits).
  void backward(const ParamSet<T>& p, const ForwardCache<T>& cache, const std::array<T, 2>& dlogits,
                ParamSet<T>& grads) const;

 private:
  struct Layout;
  DetectorConfig cfg_;
  std::shared_ptr<const Layout> layout_;
};

extern template class Detector<float>;
extern template class Detector<double>;

// Mean cross-entropy over the batch; optional per-class weights indexed by
// class. Throws Error(Argument) on an empty batch.
double cross_entropy(const std::vector<std::array<double, 2>>& logits, const std::vector<Label>& labels,
                     std::array<double, 2> class_weights = {1.0, 1.0});

inline std::size_t class_index(Label l) { return l == Label::Real ? kRealClass : kFakeClass; }

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
  // Coordinates whose perturbation flips a rectifier sign or a max
  // selection: the loss is not differentiable on that interval.
  std::size_t skipped_kink = 0;
  // Coordinates whose difference quotient is dominated by rounding noise.
  std::size_t skipped_unresolved = 0;
  std::size_t groups_total = 0;
  std::size_t groups_checked = 0;  // tensors with at least one checked coordinate
};

struct FiniteDifference {
  double value = 0.0;
  double std_error = 0.0;  // spread of the jittered estimates / sqrt(n)
  bool smooth = true;      // no branch change at any evaluated point
};

// Central difference of the CE loss along one parameter coordinate, averaged
// over `jitter` step sizes eps * (1 + 0.05 j / jitter). The spread of these
// estimates measures rounding noise; truncation error barely changes.
template <typename T>
FiniteDifference finite_difference(const Detector<T>& det, const ParamSet<T>& p, const FeatureMatrix& x,
                                   Label label, std::size_t tensor, std::size_t index, T eps,
                                   std::size_t jitter = 1);

struct GradCheckOptions {
  std::size_t per_tensor = 16;  // sampled coordinates per tensor
  std::size_t jitter = 8;
  double rel_tol = 1e-2;        // bound the check must be able to certify
  std::uint64_t seed = 0;
};

// Central finite differences against the analytic gradient of the CE loss
// for one labelled input, in inference mode. A sampled coordinate enters the
// maximum of |g_a - g_fd| / max(|g_a|, |g_fd|, 1e-8) only when it is smooth
// and 3 standard errors of the FD estimate stay below rel_tol / 2 of its
// magnitude.
template <typename T>
GradCheckResult grad_check(const Detector<T>& det, const ParamSet<T>& p, const FeatureMatrix& x, Label label,
                           T eps, const GradCheckOptions& opts = {});

// Analytic gradient for one labelled input.
template <typename T>
ParamSet<T> loss_gradient(const Detector<T>& det, const ParamSet<T>& p, const FeatureMatrix& x, Label label);

template <typename T>
T loss_value(const Detector<T>& det, const ParamSet<T>& p, const FeatureMatrix& x, Label label);

// Versioned binary checkpoint: magic, version, config JSON, named tensors.
void save_checkpoint(const std::filesystem::path& path, const DetectorConfig& cfg, const ParamSet<float>& p);
ParamSet<float> load_checkpoint(const std::filesystem::path& path, DetectorConfig* cfg);

inline constexpr char kCheckpointMagic[9] = "ESDDCKP1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace esdd
