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

#include "esdd/detector.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <json.hpp>

#include "esdd/error.hpp"

namespace esdd {

namespace {

std::size_t ceil_half(std::size_t n) { return (n + 1) / 2; }

}  // namespace

std::size_t spectral_node_count(const DetectorConfig& cfg) {
  return ceil_half(ceil_half(ceil_half(cfg.proj_dim)));
}

std::size_t temporal_node_count(std::size_t frames) { return ceil_half(ceil_half(ceil_half(frames))); }

std::string config_to_json(const DetectorConfig& c) {
  nlohmann::json j;
  j["input_dim"] = c.input_dim;
  j["proj_dim"] = c.proj_dim;
  j["enc_channels"] = c.enc_channels;
  j["gat_dim"] = c.gat_dim;
  j["n_hs_layers"] = c.n_hs_layers;
  j["leaky_slope"] = c.leaky_slope;
  j["dropout"] = c.dropout;
  j["batch_size"] = c.batch_size;
  j["weight_decay"] = c.weight_decay;
  j["lr_scratch"] = c.lr_scratch;
  j["lr_finetune"] = c.lr_finetune;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  j["class_weighting"] = c.class_weighting;
  j["front_end_id"] = c.front_end_id;
  return j.dump();
}

DetectorConfig config_from_json(const std::string& text) {
  DetectorConfig c;
  try {
    auto j = nlohmann::json::parse(text);
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.proj_dim = j.at("proj_dim").get<std::size_t>();
    c.enc_channels = j.at("enc_channels").get<std::array<std::size_t, 4>>();
    c.gat_dim = j.at("gat_dim").get<std::size_t>();
    c.n_hs_layers = j.at("n_hs_layers").get<std::size_t>();
    c.leaky_slope = j.at("leaky_slope").get<float>();
    c.dropout = j.at("dropout").get<float>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.lr_scratch = j.at("lr_scratch").get<double>();
    c.lr_finetune = j.at("lr_finetune").get<double>();
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.patience = j.at("patience").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.class_weighting = j.at("class_weighting").get<bool>();
    c.front_end_id = j.at("front_end_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("bad detector config: ") + e.what());
  }
  return c;
}

template <typename T>
bool ParamSet<T>::all_finite() const {
  for (const auto& t : tensors)
    for (T v : t.data)
      if (!std::isfinite(v)) return false;
  return true;
}

template struct ParamSet<float>;
template struct ParamSet<double>;

// ---------------------------------------------------------------------------

template <typename T>
struct ForwardCache {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  struct Block {
    Mat x, z1, a1, r1;
    std::vector<int> pool_idx;
    std::size_t H = 0, W = 0, Ho = 0, Wo = 0;
  };
  struct Att {
    Mat N, Q, K, V, A, O;
  };
  struct Gat {
    Mat Z, P, alpha, pre;
    RowVec m, pre_m;
    Vec beta;
  };

  Mat X;
  std::size_t frames = 0;
  std::vector<Block> blocks;
  Mat E, Ea;
  std::size_t S = 0, Tn = 0;
  std::vector<int> s_arg, t_arg;
  Att att_s, att_t;
  std::vector<Gat> gat;
  Mat Zf;
  RowVec mf;
  std::vector<int> ro_arg;  // argmax rows for the two max readouts
  RowVec r, mask, rd;
};

template <typename T>
void CacheDeleter<T>::operator()(ForwardCache<T>* c) const {
  delete c;
}

template struct CacheDeleter<float>;
template struct CacheDeleter<double>;

template <typename T>
struct Detector<T>::Layout {
  struct Spec {
    std::string name;
    std::vector<std::size_t> shape;
    double init_std;  // 0 -> constant init_value
    double init_value;
  };
  struct Block {
    std::size_t cin, cout;
    bool pool;
    std::size_t w1, b1, sc, sh, w2, b2;
    long ws = -1, bs = -1;
  };
  struct Gat {
    std::size_t a_ss, a_st, a_tt, a_m, v_s, v_t, u_s, u_t, u_m, b_s, b_t, b_m;
  };

  std::vector<Spec> specs;
  std::size_t proj_w, proj_b;
  std::array<Block, 4> blocks;
  std::size_t enc_sc, enc_sh, pos_s;
  std::size_t wq, bq, wk, wv, bv;  // no key bias: softmax is shift invariant per row
  std::vector<Gat> gat;
  std::size_t master, out_w, out_b;
  std::size_t S;

  std::size_t add(std::string name, std::vector<std::size_t> shape, double init_std, double init_value = 0.0) {
    specs.push_back({std::move(name), std::move(shape), init_std, init_value});
    return specs.size() - 1;
  }

  explicit Layout(const DetectorConfig& c) {
    const double s2 = 1.0 + double(c.leaky_slope) * c.leaky_slope;
    const std::size_t D = c.input_dim, P = c.proj_dim, g = c.gat_dim;
    proj_w = add("proj.w", {D, P}, std::sqrt(1.0 / D));
    proj_b = add("proj.b", {P}, 0.0);
    std::size_t cin = 1;
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t cout = c.enc_channels[k];
      const std::string pre = "enc" + std::to_string(k) + ".";
      Block b{};
      b.cin = cin;
      b.cout = cout;
      b.pool = k < 3;
      b.w1 = add(pre + "conv1.w", {cout, cin, 3, 3}, std::sqrt(2.0 / (s2 * cin * 9)));
      b.b1 = add(pre + "conv1.b", {cout}, 0.0);
      b.sc = add(pre + "norm.scale", {cout}, 0.0, 1.0);
      b.sh = add(pre + "norm.shift", {cout}, 0.0);
      b.w2 = add(pre + "conv2.w", {cout, cout, 3, 3}, std::sqrt(1.0 / (cout * 9)));
      b.b2 = add(pre + "conv2.b", {cout}, 0.0);
      if (cin != cout) {
        b.ws = static_cast<long>(add(pre + "skip.w", {cout, cin}, std::sqrt(1.0 / cin)));
        b.bs = static_cast<long>(add(pre + "skip.b", {cout}, 0.0));
      }
      blocks[k] = b;
      cin = cout;
    }
    const std::size_t C = cin;
    S = spectral_node_count(c);
    enc_sc = add("enc.out.scale", {C}, 0.0, 1.0);
    enc_sh = add("enc.out.shift", {C}, 0.0);
    pos_s = add("pos.spectral", {S, C}, 0.1);
    wq = add("att.q.w", {C, g}, std::sqrt(1.0 / C));
    bq = add("att.q.b", {g}, 0.0);
    wk = add("att.k.w", {C, g}, std::sqrt(1.0 / C));
    wv = add("att.v.w", {C, g}, std::sqrt(1.0 / C));
    bv = add("att.v.b", {g}, 0.0);
    for (std::size_t l = 0; l < c.n_hs_layers; ++l) {
      const std::string pre = "hs" + std::to_string(l) + ".";
      const double sg = std::sqrt(1.0 / g);
      Gat q{};
      q.a_ss = add(pre + "att.ss", {g}, sg);
      q.a_st = add(pre + "att.st", {g}, sg);
      q.a_tt = add(pre + "att.tt", {g}, sg);
      q.a_m = add(pre + "att.master", {g}, sg);
      q.v_s = add(pre + "value.spectral", {g, g}, sg);
      q.v_t = add(pre + "value.temporal", {g, g}, sg);
      q.u_s = add(pre + "self.spectral", {g, g}, sg);
      q.u_t = add(pre + "self.temporal", {g, g}, sg);
      q.u_m = add(pre + "self.master", {g, g}, sg);
      q.b_s = add(pre + "bias.spectral", {g}, 0.0);
      q.b_t = add(pre + "bias.temporal", {g}, 0.0);
      q.b_m = add(pre + "bias.master", {g}, 0.0);
      gat.push_back(q);
    }
    master = add("master", {1, g}, std::sqrt(1.0 / g));
    out_w = add("out.w", {5 * g, 2}, std::sqrt(1.0 / (5 * g)));
    out_b = add("out.b", {2}, 0.0);
  }
};

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
Eigen::Map<const Mat<T>> cmat(const ParamSet<T>& p, std::size_t i) {
  const auto& t = p.tensors[i];
  const Eigen::Index rows = static_cast<Eigen::Index>(t.shape[0]);
  return {t.data.data(), rows, static_cast<Eigen::Index>(t.data.size()) / rows};
}

template <typename T>
Eigen::Map<Mat<T>> gmat(ParamSet<T>& p, std::size_t i) {
  auto& t = p.tensors[i];
  const Eigen::Index rows = static_cast<Eigen::Index>(t.shape[0]);
  return {t.data.data(), rows, static_cast<Eigen::Index>(t.data.size()) / rows};
}

template <typename T>
Eigen::Map<const RowVec<T>> cvec(const ParamSet<T>& p, std::size_t i) {
  const auto& t = p.tensors[i];
  return {t.data.data(), static_cast<Eigen::Index>(t.data.size())};
}

template <typename T>
Eigen::Map<RowVec<T>> gvec(ParamSet<T>& p, std::size_t i) {
  auto& t = p.tensors[i];
  return {t.data.data(), static_cast<Eigen::Index>(t.data.size())};
}

template <typename T>
struct Leaky {
  T slope;
  Mat<T> apply(const Mat<T>& x) const { return x.unaryExpr([s = slope](T v) { return v > T(0) ? v : s * v; }); }
  // dy * f'(x)
  Mat<T> back(const Mat<T>& x, const Mat<T>& dy) const {
    return dy.binaryExpr(x, [s = slope](T d, T v) { return v > T(0) ? d : s * d; });
  }
};

template <typename T>
void im2col(const T* x, std::size_t C, std::size_t H, std::size_t W, T* col) {
  const std::size_t HW = H * W;
  const long h_max = static_cast<long>(H), w_max = static_cast<long>(W);
  for (std::size_t c = 0; c < C; ++c) {
    const T* xc = x + c * HW;
    for (long ky = 0; ky < 3; ++ky) {
      for (long kx = 0; kx < 3; ++kx) {
        T* dst = col + (c * 9 + static_cast<std::size_t>(ky * 3 + kx)) * HW;
        for (long h = 0; h < h_max; ++h) {
          const long ih = h + ky - 1;
          T* row = dst + h * w_max;
          if (ih < 0 || ih >= h_max) {
            std::fill(row, row + w_max, T(0));
            continue;
          }
          const T* src = xc + ih * w_max;
          for (long w = 0; w < w_max; ++w) {
            const long iw = w + kx - 1;
            row[w] = (iw < 0 || iw >= w_max) ? T(0) : src[iw];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, std::size_t C, std::size_t H, std::size_t W, T* dx) {
  const std::size_t HW = H * W;
  const long h_max = static_cast<long>(H), w_max = static_cast<long>(W);
  for (std::size_t c = 0; c < C; ++c) {
    T* dc = dx + c * HW;
    for (long ky = 0; ky < 3; ++ky) {
      for (long kx = 0; kx < 3; ++kx) {
        const T* src = col + (c * 9 + static_cast<std::size_t>(ky * 3 + kx)) * HW;
        for (long h = 0; h < h_max; ++h) {
          const long ih = h + ky - 1;
          if (ih < 0 || ih >= h_max) continue;
          const T* row = src + h * w_max;
          T* drow = dc + ih * w_max;
          for (long w = 0; w < w_max; ++w) {
            const long iw = w + kx - 1;
            if (iw >= 0 && iw < w_max) drow[iw] += row[w];
          }
        }
      }
    }
  }
}

template <typename T>
Mat<T> conv3x3(const Mat<T>& x, std::size_t H, std::size_t W, const Eigen::Map<const Mat<T>>& w,
               const Eigen::Map<const RowVec<T>>& b) {
  Mat<T> col(x.rows() * 9, static_cast<Eigen::Index>(H * W));
  im2col(x.data(), static_cast<std::size_t>(x.rows()), H, W, col.data());
  Mat<T> out(w.rows(), col.cols());
  out.noalias() = w * col;
  out.colwise() += b.transpose();
  return out;
}

// Accumulates dw, db and returns dx.
template <typename T>
Mat<T> conv3x3_back(const Mat<T>& x, std::size_t H, std::size_t W, const Eigen::Map<const Mat<T>>& w,
                    const Mat<T>& dy, Eigen::Map<Mat<T>> dw, Eigen::Map<RowVec<T>> db) {
  Mat<T> col(x.rows() * 9, static_cast<Eigen::Index>(H * W));
  im2col(x.data(), static_cast<std::size_t>(x.rows()), H, W, col.data());
  dw.noalias() += dy * col.transpose();
  db += dy.rowwise().sum().transpose();
  Mat<T> dcol(col.rows(), col.cols());
  dcol.noalias() = w.transpose() * dy;
  Mat<T> dx = Mat<T>::Zero(x.rows(), x.cols());
  col2im(dcol.data(), static_cast<std::size_t>(x.rows()), H, W, dx.data());
  return dx;
}

template <typename T>
Mat<T> maxpool2(const Mat<T>& x, std::size_t H, std::size_t W, std::vector<int>& idx) {
  const std::size_t Ho = ceil_half(H), Wo = ceil_half(W);
  Mat<T> out(x.rows(), static_cast<Eigen::Index>(Ho * Wo));
  idx.assign(static_cast<std::size_t>(x.rows()) * Ho * Wo, 0);
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    const T* xc = x.data() + c * x.cols();
    for (std::size_t oh = 0; oh < Ho; ++oh) {
      for (std::size_t ow = 0; ow < Wo; ++ow) {
        std::size_t best = (2 * oh) * W + 2 * ow;
        for (std::size_t h = 2 * oh; h < std::min(H, 2 * oh + 2); ++h)
          for (std::size_t w = 2 * ow; w < std::min(W, 2 * ow + 2); ++w)
            if (xc[h * W + w] > xc[best]) best = h * W + w;
        const std::size_t o = oh * Wo + ow;
        out(c, static_cast<Eigen::Index>(o)) = xc[best];
        idx[static_cast<std::size_t>(c) * Ho * Wo + o] = static_cast<int>(best);
      }
    }
  }
  return out;
}

template <typename T>
Mat<T> row_softmax(const Mat<T>& e) {
  Mat<T> out(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    const T m = e.row(i).maxCoeff();
    out.row(i) = (e.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

// d(loss)/d(logits of a row softmax) from d(loss)/d(probabilities).
template <typename T>
Mat<T> row_softmax_back(const Mat<T>& a, const Mat<T>& da) {
  Mat<T> out = a.cwiseProduct(da);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const T s = out.row(i).sum();
    out.row(i) -= s * a.row(i);
  }
  return out;
}

}  // namespace

template <typename T>
Detector<T>::Detector(const DetectorConfig& cfg) : cfg_(cfg) {
  if (cfg.input_dim < 1 || cfg.proj_dim < 1 || cfg.gat_dim < 1)
    fail(ErrorKind::Config, "detector dimensions must be positive");
  for (auto c : cfg.enc_channels)
    if (c < 1) fail(ErrorKind::Config, "encoder channel counts must be positive");
  if (cfg.dropout < 0.0f || cfg.dropout >= 1.0f) fail(ErrorKind::Config, "dropout must lie in [0, 1)");
  layout_ = std::make_shared<Layout>(cfg);
}

template <typename T>
ParamSet<T> Detector<T>::init_params(std::uint64_t seed) const {
  Rng rng(seed);
  ParamSet<T> p;
  for (const auto& s : layout_->specs) {
    std::size_t n = 1;
    for (auto d : s.shape) n *= d;
    Tensor<T> t{s.name, s.shape, std::vector<T>(n)};
    for (auto& v : t.data) v = static_cast<T>(s.init_std > 0.0 ? s.init_std * rng.normal() : s.init_value);
    p.tensors.push_back(std::move(t));
  }
  return p;
}

template <typename T>
DetectorOutput<T> Detector<T>::forward(const ParamSet<T>& p, const FeatureMatrix& x, Rng* dropout_rng,
                                       CachePtr<T>* cache_out) const {
  const Layout& L = *layout_;
  if (p.tensors.size() != L.specs.size())
    fail(ErrorKind::Shape, "parameter set has " + std::to_string(p.tensors.size()) + " tensors, expected " +
                               std::to_string(L.specs.size()));
  if (x.dims != cfg_.input_dim)
    fail(ErrorKind::Shape, "feature width " + std::to_string(x.dims) + " does not match expected input_D " +
                               std::to_string(cfg_.input_dim));
  if (x.frames < 1) fail(ErrorKind::Shape, "feature matrix has no frames");
  if (x.values.size() != x.frames * x.dims) fail(ErrorKind::Shape, "feature matrix storage does not match T x D");

  CachePtr<T> owned(new ForwardCache<T>());
  ForwardCache<T>& c = *owned;
  const Leaky<T> act{static_cast<T>(cfg_.leaky_slope)};
  const std::size_t Tf = x.frames, P = cfg_.proj_dim, g = cfg_.gat_dim;
  c.frames = Tf;

  c.X = Eigen::Map<const Mat<float>>(x.values.data(), static_cast<Eigen::Index>(Tf),
                                     static_cast<Eigen::Index>(x.dims))
            .template cast<T>();
  Mat<T> y0 = c.X * cmat(p, L.proj_w);
  y0.rowwise() += cvec(p, L.proj_b);
  // 1 x (P * Tf) map laid out as [freq][time].
  Mat<T> feat(1, static_cast<Eigen::Index>(P * Tf));
  Eigen::Map<Mat<T>>(feat.data(), static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(Tf)) = y0.transpose();

  std::size_t H = P, W = Tf;
  c.blocks.resize(4);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& bl = L.blocks[k];
    auto& bc = c.blocks[k];
    bc.H = H;
    bc.W = W;
    bc.x = std::move(feat);
    bc.z1 = conv3x3<T>(bc.x, H, W, cmat(p, bl.w1), cvec(p, bl.b1));
    bc.a1 = bc.z1;
    bc.a1.array().colwise() *= cvec(p, bl.sc).transpose().array();
    bc.a1.colwise() += cvec(p, bl.sh).transpose();
    bc.r1 = act.apply(bc.a1);
    Mat<T> s = conv3x3<T>(bc.r1, H, W, cmat(p, bl.w2), cvec(p, bl.b2));
    if (bl.ws >= 0) {
      s.noalias() += cmat(p, static_cast<std::size_t>(bl.ws)) * bc.x;
      s.colwise() += cvec(p, static_cast<std::size_t>(bl.bs)).transpose();
    } else {
      s += bc.x;
    }
    if (bl.pool) {
      feat = maxpool2<T>(s, H, W, bc.pool_idx);
      H = ceil_half(H);
      W = ceil_half(W);
    } else {
      feat = std::move(s);
    }
    bc.Ho = H;
    bc.Wo = W;
  }

  const std::size_t S = H, Tn = W;
  const Eigen::Index C = feat.rows();
  c.S = S;
  c.Tn = Tn;
  c.E = std::move(feat);
  c.Ea = c.E;
  c.Ea.array().colwise() *= cvec(p, L.enc_sc).transpose().array();
  c.Ea.colwise() += cvec(p, L.enc_sh).transpose();
  const Mat<T> e = act.apply(c.Ea);

  Mat<T> sn(static_cast<Eigen::Index>(S), C), tn(static_cast<Eigen::Index>(Tn), C);
  c.s_arg.assign(S * static_cast<std::size_t>(C), 0);
  c.t_arg.assign(Tn * static_cast<std::size_t>(C), 0);
  for (Eigen::Index ch = 0; ch < C; ++ch) {
    const T* ec = e.data() + ch * e.cols();
    for (std::size_t si = 0; si < S; ++si) {
      std::size_t best = si * Tn;
      for (std::size_t w = 1; w < Tn; ++w)
        if (ec[si * Tn + w] > ec[best]) best = si * Tn + w;
      sn(static_cast<Eigen::Index>(si), ch) = ec[best];
      c.s_arg[si * static_cast<std::size_t>(C) + static_cast<std::size_t>(ch)] = static_cast<int>(best);
    }
    for (std::size_t w = 0; w < Tn; ++w) {
      std::size_t best = w;
      for (std::size_t si = 1; si < S; ++si)
        if (ec[si * Tn + w] > ec[best]) best = si * Tn + w;
      tn(static_cast<Eigen::Index>(w), ch) = ec[best];
      c.t_arg[w * static_cast<std::size_t>(C) + static_cast<std::size_t>(ch)] = static_cast<int>(best);
    }
  }
  sn += cmat(p, L.pos_s);

  const T inv_sqrt_g = T(1) / std::sqrt(static_cast<T>(g));
  auto attend = [&](const Mat<T>& nodes, typename ForwardCache<T>::Att& a) {
    a.N = nodes;
    a.Q = nodes * cmat(p, L.wq);
    a.Q.rowwise() += cvec(p, L.bq);
    a.K = nodes * cmat(p, L.wk);
    a.V = nodes * cmat(p, L.wv);
    a.V.rowwise() += cvec(p, L.bv);
    a.A = row_softmax<T>((a.Q * a.K.transpose()) * inv_sqrt_g);
    a.O = a.A * a.V;
    return act.apply(a.O);
  };
  const Mat<T> hs = attend(sn, c.att_s);
  const Mat<T> ht = attend(tn, c.att_t);

  const Eigen::Index Si = static_cast<Eigen::Index>(S), Ti = static_cast<Eigen::Index>(Tn);
  Mat<T> Z(Si + Ti, static_cast<Eigen::Index>(g));
  Z.topRows(Si) = hs;
  Z.bottomRows(Ti) = ht;
  RowVec<T> m = cmat(p, L.master).row(0);
  c.gat.resize(L.gat.size());
  for (std::size_t l = 0; l < L.gat.size(); ++l) {
    const auto& q = L.gat[l];
    auto& gc = c.gat[l];
    gc.Z = Z;
    gc.m = m;
    const auto Zs = Z.topRows(Si);
    const auto Zt = Z.bottomRows(Ti);
    gc.P.resize(Z.rows(), Z.cols());
    gc.P.topRows(Si).noalias() = Zs * cmat(p, q.v_s);
    gc.P.bottomRows(Ti).noalias() = Zt * cmat(p, q.v_t);
    Mat<T> E(Z.rows(), Z.rows());
    const Mat<T> zs_ss = Zs.array().rowwise() * cvec(p, q.a_ss).array();
    const Mat<T> zs_st = Zs.array().rowwise() * cvec(p, q.a_st).array();
    const Mat<T> zt_st = Zt.array().rowwise() * cvec(p, q.a_st).array();
    const Mat<T> zt_tt = Zt.array().rowwise() * cvec(p, q.a_tt).array();
    E.topLeftCorner(Si, Si).noalias() = zs_ss * Zs.transpose();
    E.topRightCorner(Si, Ti).noalias() = zs_st * Zt.transpose();
    E.bottomLeftCorner(Ti, Si).noalias() = zt_st * Zs.transpose();
    E.bottomRightCorner(Ti, Ti).noalias() = zt_tt * Zt.transpose();
    gc.alpha = row_softmax<T>(E);
    gc.pre = gc.alpha * gc.P;
    gc.pre.topRows(Si).noalias() += Zs * cmat(p, q.u_s);
    gc.pre.topRows(Si).rowwise() += cvec(p, q.b_s);
    gc.pre.bottomRows(Ti).noalias() += Zt * cmat(p, q.u_t);
    gc.pre.bottomRows(Ti).rowwise() += cvec(p, q.b_t);

    const RowVec<T> wm = m.cwiseProduct(cvec(p, q.a_m));
    Vec<T> em = Z * wm.transpose();
    em.array() -= em.maxCoeff();
    gc.beta = em.array().exp();
    gc.beta /= gc.beta.sum();
    gc.pre_m = gc.beta.transpose() * gc.P;
    gc.pre_m.noalias() += m * cmat(p, q.u_m);
    gc.pre_m += cvec(p, q.b_m);

    Z = act.apply(gc.pre);
    m = act.apply(gc.pre_m);
  }
  c.Zf = Z;
  c.mf = m;

  const Eigen::Index gi = static_cast<Eigen::Index>(g);
  c.r.resize(5 * gi);
  c.ro_arg.assign(2 * g, 0);
  for (Eigen::Index k = 0; k < gi; ++k) {
    Eigen::Index is = 0, it = 0;
    c.r(k) = Z.topRows(Si).col(k).maxCoeff(&is);
    c.r(2 * gi + k) = Z.bottomRows(Ti).col(k).maxCoeff(&it);
    c.ro_arg[static_cast<std::size_t>(k)] = static_cast<int>(is);
    c.ro_arg[g + static_cast<std::size_t>(k)] = static_cast<int>(Si + it);
  }
  c.r.segment(gi, gi) = Z.topRows(Si).colwise().mean();
  c.r.segment(3 * gi, gi) = Z.bottomRows(Ti).colwise().mean();
  c.r.segment(4 * gi, gi) = m;

  c.mask = RowVec<T>::Ones(5 * gi);
  if (dropout_rng != nullptr && cfg_.dropout > 0.0f) {
    const T keep_scale = T(1) / (T(1) - static_cast<T>(cfg_.dropout));
    for (Eigen::Index k = 0; k < c.mask.size(); ++k)
      c.mask(k) = dropout_rng->uniform() < cfg_.dropout ? T(0) : keep_scale;
  }
  c.rd = c.r.cwiseProduct(c.mask);
  RowVec<T> logits = c.rd * cmat(p, L.out_w);
  logits += cvec(p, L.out_b);

  DetectorOutput<T> out;
  out.logits = {logits(0), logits(1)};
  out.score = out.logits[kRealClass] - out.logits[kFakeClass];
  out.spectral_nodes = S;
  out.temporal_nodes = Tn;
  if (cache_out != nullptr) *cache_out = std::move(owned);
  return out;
}

template <typename T>
void Detector<T>::backward(const ParamSet<T>& p, const ForwardCache<T>& c, const std::array<T, 2>& dlogits,
                           ParamSet<T>& gr) const {
  const Layout& L = *layout_;
  if (gr.tensors.size() != L.specs.size()) fail(ErrorKind::Shape, "gradient set does not match the layout");
  const Leaky<T> act{static_cast<T>(cfg_.leaky_slope)};
  const std::size_t g = cfg_.gat_dim;
  const Eigen::Index gi = static_cast<Eigen::Index>(g);
  const Eigen::Index Si = static_cast<Eigen::Index>(c.S), Ti = static_cast<Eigen::Index>(c.Tn);

  RowVec<T> dl(2);
  dl << dlogits[0], dlogits[1];
  gmat(gr, L.out_w).noalias() += c.rd.transpose() * dl;
  gvec(gr, L.out_b) += dl;
  const RowVec<T> dr = (dl * cmat(p, L.out_w).transpose()).cwiseProduct(c.mask);

  Mat<T> dZ = Mat<T>::Zero(Si + Ti, gi);
  for (Eigen::Index k = 0; k < gi; ++k) {
    dZ(c.ro_arg[static_cast<std::size_t>(k)], k) += dr(k);
    dZ(c.ro_arg[g + static_cast<std::size_t>(k)], k) += dr(2 * gi + k);
  }
  dZ.topRows(Si).rowwise() += dr.segment(gi, gi) / static_cast<T>(Si);
  dZ.bottomRows(Ti).rowwise() += dr.segment(3 * gi, gi) / static_cast<T>(Ti);
  RowVec<T> dm = dr.segment(4 * gi, gi);

  for (std::size_t li = L.gat.size(); li-- > 0;) {
    const auto& q = L.gat[li];
    const auto& gc = c.gat[li];
    const Mat<T> dpre = act.back(gc.pre, dZ);
    const Mat<T> dpre_m = act.back(Mat<T>(gc.pre_m), Mat<T>(dm));
    const auto Zs = gc.Z.topRows(Si);
    const auto Zt = gc.Z.bottomRows(Ti);
    Mat<T> dZin = Mat<T>::Zero(gc.Z.rows(), gc.Z.cols());
    RowVec<T> dmin = RowVec<T>::Zero(gi);

    gmat(gr, q.u_s).noalias() += Zs.transpose() * dpre.topRows(Si);
    gmat(gr, q.u_t).noalias() += Zt.transpose() * dpre.bottomRows(Ti);
    gvec(gr, q.b_s) += dpre.topRows(Si).colwise().sum();
    gvec(gr, q.b_t) += dpre.bottomRows(Ti).colwise().sum();
    dZin.topRows(Si).noalias() += dpre.topRows(Si) * cmat(p, q.u_s).transpose();
    dZin.bottomRows(Ti).noalias() += dpre.bottomRows(Ti) * cmat(p, q.u_t).transpose();

    const Mat<T> dalpha = dpre * gc.P.transpose();
    Mat<T> dP = gc.alpha.transpose() * dpre;

    // Master node.
    gmat(gr, q.u_m).noalias() += gc.m.transpose() * dpre_m;
    gvec(gr, q.b_m) += dpre_m.row(0);
    dmin.noalias() += dpre_m * cmat(p, q.u_m).transpose();
    const Vec<T> dbeta = gc.P * dpre_m.transpose();
    dP.noalias() += gc.beta * dpre_m;
    const Vec<T> dem = gc.beta.cwiseProduct((dbeta.array() - gc.beta.dot(dbeta)).matrix());
    const RowVec<T> wm = gc.m.cwiseProduct(cvec(p, q.a_m));
    dZin.noalias() += dem * wm;
    const RowVec<T> dwm = dem.transpose() * gc.Z;
    gvec(gr, q.a_m) += dwm.cwiseProduct(gc.m);
    dmin += dwm.cwiseProduct(cvec(p, q.a_m));

    // Pairwise attention scores.
    const Mat<T> dE = row_softmax_back<T>(gc.alpha, dalpha);
    auto pair_back = [&](Eigen::Index r0, Eigen::Index rn, Eigen::Index c0, Eigen::Index cn, std::size_t a_idx) {
      const Mat<T> dEb = dE.block(r0, c0, rn, cn);
      const auto Zx = gc.Z.middleRows(r0, rn);
      const auto Zy = gc.Z.middleRows(c0, cn);
      const auto a = cvec(p, a_idx);
      const Mat<T> dEZy = dEb * Zy;
      const Mat<T> dEtZx = dEb.transpose() * Zx;
      dZin.middleRows(r0, rn).array() += dEZy.array().rowwise() * a.array();
      dZin.middleRows(c0, cn).array() += dEtZx.array().rowwise() * a.array();
      gvec(gr, a_idx) += Zx.cwiseProduct(dEZy).colwise().sum();
    };
    pair_back(0, Si, 0, Si, q.a_ss);
    pair_back(0, Si, Si, Ti, q.a_st);
    pair_back(Si, Ti, 0, Si, q.a_st);
    pair_back(Si, Ti, Si, Ti, q.a_tt);

    gmat(gr, q.v_s).noalias() += Zs.transpose() * dP.topRows(Si);
    gmat(gr, q.v_t).noalias() += Zt.transpose() * dP.bottomRows(Ti);
    dZin.topRows(Si).noalias() += dP.topRows(Si) * cmat(p, q.v_s).transpose();
    dZin.bottomRows(Ti).noalias() += dP.bottomRows(Ti) * cmat(p, q.v_t).transpose();

    dZ = std::move(dZin);
    dm = dmin;
  }
  gvec(gr, L.master) += dm;

  const T inv_sqrt_g = T(1) / std::sqrt(static_cast<T>(g));
  auto attend_back = [&](const typename ForwardCache<T>::Att& a, const Mat<T>& dH) {
    const Mat<T> dO = act.back(a.O, dH);
    const Mat<T> dA = dO * a.V.transpose();
    const Mat<T> dV = a.A.transpose() * dO;
    const Mat<T> dSc = row_softmax_back<T>(a.A, dA) * inv_sqrt_g;
    const Mat<T> dQ = dSc * a.K;
    const Mat<T> dK = dSc.transpose() * a.Q;
    gmat(gr, L.wq).noalias() += a.N.transpose() * dQ;
    gmat(gr, L.wk).noalias() += a.N.transpose() * dK;
    gmat(gr, L.wv).noalias() += a.N.transpose() * dV;
    gvec(gr, L.bq) += dQ.colwise().sum();
    gvec(gr, L.bv) += dV.colwise().sum();
    Mat<T> dN = dQ * cmat(p, L.wq).transpose();
    dN.noalias() += dK * cmat(p, L.wk).transpose();
    dN.noalias() += dV * cmat(p, L.wv).transpose();
    return dN;
  };
  const Mat<T> dsn = attend_back(c.att_s, dZ.topRows(Si));
  const Mat<T> dtn = attend_back(c.att_t, dZ.bottomRows(Ti));
  gmat(gr, L.pos_s) += dsn;

  const Eigen::Index C = c.E.rows();
  Mat<T> de = Mat<T>::Zero(C, c.E.cols());
  for (Eigen::Index ch = 0; ch < C; ++ch) {
    for (Eigen::Index si = 0; si < Si; ++si)
      de(ch, c.s_arg[static_cast<std::size_t>(si * C + ch)]) += dsn(si, ch);
    for (Eigen::Index w = 0; w < Ti; ++w)
      de(ch, c.t_arg[static_cast<std::size_t>(w * C + ch)]) += dtn(w, ch);
  }
  const Mat<T> dEa = act.back(c.Ea, de);
  gvec(gr, L.enc_sc) += dEa.cwiseProduct(c.E).rowwise().sum().transpose();
  gvec(gr, L.enc_sh) += dEa.rowwise().sum().transpose();
  Mat<T> dfeat = dEa.array().colwise() * cvec(p, L.enc_sc).transpose().array();

  for (std::size_t k = 4; k-- > 0;) {
    const auto& bl = L.blocks[k];
    const auto& bc = c.blocks[k];
    Mat<T> ds;
    if (bl.pool) {
      ds = Mat<T>::Zero(dfeat.rows(), static_cast<Eigen::Index>(bc.H * bc.W));
      const std::size_t n_out = bc.Ho * bc.Wo;
      for (Eigen::Index ch = 0; ch < ds.rows(); ++ch)
        for (std::size_t o = 0; o < n_out; ++o)
          ds(ch, bc.pool_idx[static_cast<std::size_t>(ch) * n_out + o]) += dfeat(ch, static_cast<Eigen::Index>(o));
    } else {
      ds = std::move(dfeat);
    }
    Mat<T> dx;
    if (bl.ws >= 0) {
      const auto ws = static_cast<std::size_t>(bl.ws);
      gmat(gr, ws).noalias() += ds * bc.x.transpose();
      gvec(gr, static_cast<std::size_t>(bl.bs)) += ds.rowwise().sum().transpose();
      dx = cmat(p, ws).transpose() * ds;
    } else {
      dx = ds;
    }
    const Mat<T> dr1 = conv3x3_back<T>(bc.r1, bc.H, bc.W, cmat(p, bl.w2), ds, gmat(gr, bl.w2), gvec(gr, bl.b2));
    const Mat<T> da1 = act.back(bc.a1, dr1);
    gvec(gr, bl.sc) += da1.cwiseProduct(bc.z1).rowwise().sum().transpose();
    gvec(gr, bl.sh) += da1.rowwise().sum().transpose();
    const Mat<T> dz1 = da1.array().colwise() * cvec(p, bl.sc).transpose().array();
    dx += conv3x3_back<T>(bc.x, bc.H, bc.W, cmat(p, bl.w1), dz1, gmat(gr, bl.w1), gvec(gr, bl.b1));
    dfeat = std::move(dx);
  }

  // dfeat is 1 x (P * Tf) laid out [freq][time]; transpose back to Tf x P.
  const Eigen::Index Pi = static_cast<Eigen::Index>(cfg_.proj_dim), Tfi = static_cast<Eigen::Index>(c.frames);
  const Mat<T> dy0 = Eigen::Map<const Mat<T>>(dfeat.data(), Pi, Tfi).transpose();
  gmat(gr, L.proj_w).noalias() += c.X.transpose() * dy0;
  gvec(gr, L.proj_b) += dy0.colwise().sum();
}

template class Detector<float>;
template class Detector<double>;

namespace {

// Hash of every branch decision taken by a forward pass.
template <typename T>
std::uint64_t branch_signature(const ForwardCache<T>& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 0x100000001b3ull; };
  auto signs = [&mix](const auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) mix(m.data()[i] > 0 ? 1u : 2u);
  };
  auto indices = [&mix](const std::vector<int>& v) {
    for (int i : v) mix(static_cast<std::uint64_t>(i) + 3u);
  };
  for (const auto& b : c.blocks) {
    signs(b.a1);
    indices(b.pool_idx);
  }
  signs(c.Ea);
  indices(c.s_arg);
  indices(c.t_arg);
  signs(c.att_s.O);
  signs(c.att_t.O);
  for (const auto& g : c.gat) {
    signs(g.pre);
    signs(g.pre_m);
  }
  indices(c.ro_arg);
  return h;
}

template <typename T>
T ce_from_logits(const std::array<T, 2>& l, Label label) {
  const T m = std::max(l[0], l[1]);
  return m + std::log(std::exp(l[0] - m) + std::exp(l[1] - m)) - l[class_index(label)];
}

}  // namespace

// ---------------------------------------------------------------------------

double cross_entropy(const std::vector<std::array<double, 2>>& logits, const std::vector<Label>& labels,
                     std::array<double, 2> w) {
  if (logits.empty()) fail(ErrorKind::Argument, "loss over an empty batch");
  if (logits.size() != labels.size()) fail(ErrorKind::Argument, "logit and label counts differ");
  double total = 0.0, weight = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto& l = logits[i];
    const std::size_t y = class_index(labels[i]);
    // log(1 + e^(other - own)), stable in both tails.
    const double d = l[1 - y] - l[y];
    const double nll = d > 0 ? d + std::log1p(std::exp(-d)) : std::log1p(std::exp(d));
    total += w[y] * nll;
    weight += w[y];
  }
  return total / weight;
}

namespace {

template <typename T>
std::array<T, 2> softmax2(const std::array<T, 2>& l) {
  const T m = std::max(l[0], l[1]);
  const T e0 = std::exp(l[0] - m), e1 = std::exp(l[1] - m);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

template <typename T>
ParamSet<T> zeros_like(const ParamSet<T>& p) {
  ParamSet<T> z;
  for (const auto& t : p.tensors) z.tensors.push_back({t.name, t.shape, std::vector<T>(t.data.size(), T(0))});
  return z;
}

}  // namespace

template <typename T>
T loss_value(const Detector<T>& det, const ParamSet<T>& p, const FeatureMatrix& x, Label label) {
  return ce_from_logits(det.forward(p, x).logits, label);
}

template <typename T>
ParamSet<T> loss_gradient(const Detector<T>& det, const ParamSet<T>& p, const FeatureMatrix& x, Label label) {
  CachePtr<T> cache;
  const auto out = det.forward(p, x, nullptr, &cache);
  auto pr = softmax2(out.logits);
  pr[class_index(label)] -= T(1);
  ParamSet<T> g = zeros_like(p);
  det.backward(p, *cache, pr, g);
  return g;
}

template <typename T>
FiniteDifference finite_difference(const Detector<T>& det, const ParamSet<T>& p, const FeatureMatrix& x,
                                   Label label, std::size_t tensor, std::size_t index, T eps, std::size_t jitter) {
  ParamSet<T> q = p;
  T& w = q.tensors.at(tensor).data.at(index);
  const T orig = w;
  CachePtr<T> c0, cp, cm;
  det.forward(q, x, nullptr, &c0);
  const std::uint64_t s0 = branch_signature(*c0);
  FiniteDifference fd;
  const std::size_t n = std::max<std::size_t>(jitter, 1);
  std::vector<double> est(n);
  for (std::size_t j = 0; j < n; ++j) {
    const T h = static_cast<T>(double(eps) * (1.0 + 0.05 * double(j) / double(n)));
    w = orig + h;
    const T lp = ce_from_logits(det.forward(q, x, nullptr, &cp).logits, label);
    const double hp = double(w) - double(orig);  // step actually taken in T
    w = orig - h;
    const T lm = ce_from_logits(det.forward(q, x, nullptr, &cm).logits, label);
    const double hm = double(orig) - double(w);
    w = orig;
    est[j] = (double(lp) - double(lm)) / (hp + hm);
    fd.smooth = fd.smooth && branch_signature(*cp) == s0 && branch_signature(*cm) == s0;
  }
  double mean = 0.0;
  for (double e : est) mean += e;
  mean /= double(n);
  double var = 0.0;
  for (double e : est) var += (e - mean) * (e - mean);
  fd.value = mean;
  fd.std_error = n > 1 ? std::sqrt(var / double(n - 1) / double(n)) : 0.0;
  return fd;
}

template <typename T>
GradCheckResult grad_check(const Detector<T>& det, const ParamSet<T>& p, const FeatureMatrix& x, Label label,
                           T eps, const GradCheckOptions& opts) {
  const ParamSet<T> analytic = loss_gradient(det, p, x, label);
  const T loss = loss_value(det, p, x, label);
  const T mag_loss = std::max(std::abs(loss), T(1));
  const double quantum =
      double(std::nextafter(mag_loss, std::numeric_limits<T>::infinity()) - mag_loss) / (2.0 * double(eps));
  Rng rng(opts.seed);
  GradCheckResult res;
  res.groups_total = p.tensors.size();
  for (std::size_t ti = 0; ti < p.tensors.size(); ++ti) {
    std::vector<std::size_t> coords(p.tensors[ti].data.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    rng.shuffle(coords);
    if (coords.size() > opts.per_tensor) coords.resize(opts.per_tensor);
    bool any = false;
    for (std::size_t i : coords) {
      const FiniteDifference fd = finite_difference(det, p, x, label, ti, i, eps, opts.jitter);
      if (!fd.smooth) {
        ++res.skipped_kink;
        continue;
      }
      const double ga = analytic.tensors[ti].data[i];
      const double mag = std::max({std::abs(ga), std::abs(fd.value), 1e-8});
      // Identical quotients give zero spread; one loss ulp over 2 eps is the
      // smallest change a difference in T can register.
      const double noise = std::max(fd.std_error, quantum);
      if (3.0 * noise > 0.5 * opts.rel_tol * mag) {
        ++res.skipped_unresolved;
        continue;
      }
      const double rel = std::abs(ga - fd.value) / mag;
      ++res.checked;
      any = true;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = p.tensors[ti].name + "[" + std::to_string(i) + "]";
      }
    }
    if (any) ++res.groups_checked;
  }
  return res;
}

template float loss_value(const Detector<float>&, const ParamSet<float>&, const FeatureMatrix&, Label);
template double loss_value(const Detector<double>&, const ParamSet<double>&, const FeatureMatrix&, Label);
template ParamSet<float> loss_gradient(const Detector<float>&, const ParamSet<float>&, const FeatureMatrix&, Label);
template ParamSet<double> loss_gradient(const Detector<double>&, const ParamSet<double>&, const FeatureMatrix&,
                                        Label);
template GradCheckResult grad_check(const Detector<float>&, const ParamSet<float>&, const FeatureMatrix&, Label,
                                    float, const GradCheckOptions&);
template GradCheckResult grad_check(const Detector<double>&, const ParamSet<double>&, const FeatureMatrix&, Label,
                                    double, const GradCheckOptions&);
template FiniteDifference finite_difference(const Detector<float>&, const ParamSet<float>&, const FeatureMatrix&,
                                            Label, std::size_t, std::size_t, float, std::size_t);
template FiniteDifference finite_difference(const Detector<double>&, const ParamSet<double>&, const FeatureMatrix&,
                                            Label, std::size_t, std::size_t, double, std::size_t);

// ---------------------------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) fail(ErrorKind::Length, "checkpoint truncated reading " + what);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

std::string get_bytes(std::istream& in, std::size_t n, const std::string& what) {
  // Names and the config echo are small; a huge length means corruption.
  if (n > (1u << 24)) fail(ErrorKind::Length, "checkpoint field " + what + " has implausible length");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n)))
    fail(ErrorKind::Length, "checkpoint truncated reading " + what);
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const DetectorConfig& cfg, const ParamSet<float>& p) {
  std::string out(kCheckpointMagic, 8);
  put_u32(out, kCheckpointVersion);
  const std::string cj = config_to_json(cfg);
  put_u32(out, static_cast<std::uint32_t>(cj.size()));
  out += cj;
  put_u32(out, static_cast<std::uint32_t>(p.tensors.size()));
  for (const auto& t : p.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.data) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(out, bits);
    }
  }
  write_text_file(path, out);
}

ParamSet<float> load_checkpoint(const std::filesystem::path& path, DetectorConfig* cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open checkpoint " + path.string());
  const std::uintmax_t file_size = std::filesystem::file_size(path);
  const std::string magic = get_bytes(in, 8, "magic");
  if (magic != std::string(kCheckpointMagic, 8)) fail(ErrorKind::Format, "bad checkpoint magic in " + path.string());
  const std::uint32_t version = get_u32(in, "version");
  if (version != kCheckpointVersion)
    fail(ErrorKind::Format, "unsupported checkpoint version " + std::to_string(version));
  const DetectorConfig c = config_from_json(get_bytes(in, get_u32(in, "config length"), "config"));
  const std::uint32_t n = get_u32(in, "tensor count");
  ParamSet<float> p;
  for (std::uint32_t i = 0; i < n; ++i) {
    Tensor<float> t;
    t.name = get_bytes(in, get_u32(in, "name length"), "name");
    const std::uint32_t nd = get_u32(in, "rank");
    std::size_t count = 1;
    for (std::uint32_t k = 0; k < nd; ++k) {
      t.shape.push_back(get_u32(in, "shape"));
      count *= t.shape.back();
    }
    const auto pos = static_cast<std::uintmax_t>(in.tellg());
    if (count > (file_size - std::min(pos, file_size)) / 4)
      fail(ErrorKind::Length, "checkpoint tensor " + t.name + " extends past the end of " + path.string());
    t.data.resize(count);
    for (auto& v : t.data) {
      const std::uint32_t bits = get_u32(in, "tensor " + t.name);
      std::memcpy(&v, &bits, 4);
    }
    p.tensors.push_back(std::move(t));
  }
  // Validate against the layout implied by the stored config.
  const Detector<float> det(c);
  const ParamSet<float> ref = det.init_params(0);
  if (ref.tensors.size() != p.tensors.size()) fail(ErrorKind::Format, "checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < ref.tensors.size(); ++i) {
    if (ref.tensors[i].name != p.tensors[i].name || ref.tensors[i].shape != p.tensors[i].shape)
      fail(ErrorKind::Format, "checkpoint tensor " + p.tensors[i].name + " does not match the config layout");
  }
  if (cfg != nullptr) *cfg = c;
  return p;
}

}  // namespace esdd
