/*
 * Copyright 2026 The Damagen Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "damagen/core/errors.hpp"
#include "damagen/core/rng.hpp"

// Minimal training stack used by every model in the project: dense, conv,
// layer norm, multi-head attention, embeddings, Adam. Forward passes take an
// explicit cache object; passing nullptr runs inference only, which keeps
// shared parameters safe for concurrent readers. Gradients accumulate into
// the tensors themselves, so training is single-threaded by construction.

namespace damagen::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Parameter groups; optimizers update only the groups they are given.
enum Group : int {
  kBackbone = 0,
  kHead = 1,
  kAdapter = 2,
};

template <typename S>
struct Tensor {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  Mat<S> m;  // Adam first moment
  Mat<S> v;  // Adam second moment
  int group = kBackbone;

  void init(const std::string& n, Eigen::Index rows, Eigen::Index cols, int grp) {
    name = n;
    group = grp;
    value = Mat<S>::Zero(rows, cols);
    grad = Mat<S>::Zero(rows, cols);
    m = Mat<S>::Zero(rows, cols);
    v = Mat<S>::Zero(rows, cols);
  }
  void zero_grad() { grad.setZero(); }
};

template <typename S>
using TensorList = std::vector<Tensor<S>*>;

template <typename S>
inline void zero_grads(const TensorList<S>& ts) {
  for (auto* t : ts) t->zero_grad();
}

// ---------------------------------------------------------------------------
// Initializers
// ---------------------------------------------------------------------------

template <typename S>
inline void normal_init(Mat<S>& m, Rng& rng, double stddev) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      m(i, j) = static_cast<S>(rng.normal(0.0, stddev));
}

template <typename S>
inline void he_init(Mat<S>& m, Rng& rng, Eigen::Index fan_in) {
  normal_init(m, rng, std::sqrt(2.0 / static_cast<double>(fan_in)));
}

template <typename S>
inline void xavier_init(Mat<S>& m, Rng& rng, Eigen::Index fan_in, Eigen::Index fan_out) {
  normal_init(m, rng, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)));
}

// ---------------------------------------------------------------------------
// Elementwise activations
// ---------------------------------------------------------------------------

template <typename S>
inline S gelu_scalar(S x) {
  const S c = static_cast<S>(0.7978845608028654);  // sqrt(2/pi)
  const S a = static_cast<S>(0.044715);
  S u = c * (x + a * x * x * x);
  return static_cast<S>(0.5) * x * (static_cast<S>(1) + std::tanh(u));
}

template <typename S>
inline S gelu_grad_scalar(S x) {
  const S c = static_cast<S>(0.7978845608028654);
  const S a = static_cast<S>(0.044715);
  S u = c * (x + a * x * x * x);
  S t = std::tanh(u);
  S du = c * (static_cast<S>(1) + static_cast<S>(3) * a * x * x);
  return static_cast<S>(0.5) * (static_cast<S>(1) + t) +
         static_cast<S>(0.5) * x * (static_cast<S>(1) - t * t) * du;
}

template <typename S>
struct GeluCache {
  Mat<S> x;
};

template <typename S>
inline Mat<S> gelu(const Mat<S>& x, GeluCache<S>* cache = nullptr) {
  if (cache) cache->x = x;
  return x.unaryExpr([](S v) { return gelu_scalar(v); });
}

template <typename S>
inline Mat<S> gelu_backward(const Mat<S>& dy, const GeluCache<S>& cache) {
  return dy.cwiseProduct(cache.x.unaryExpr([](S v) { return gelu_grad_scalar(v); }));
}

template <typename S>
struct ReluCache {
  Mat<S> x;
};

template <typename S>
inline Mat<S> relu(const Mat<S>& x, ReluCache<S>* cache = nullptr) {
  if (cache) cache->x = x;
  return x.cwiseMax(static_cast<S>(0));
}

template <typename S>
inline Mat<S> relu_backward(const Mat<S>& dy, const ReluCache<S>& cache) {
  return dy.cwiseProduct(
      cache.x.unaryExpr([](S v) { return v > S(0) ? S(1) : S(0); }));
}

template <typename S>
inline S sigmoid_scalar(S z) {
  if (z >= S(0)) return S(1) / (S(1) + std::exp(-z));
  S e = std::exp(z);
  return e / (S(1) + e);
}

// ---------------------------------------------------------------------------
// Dense layer: y = W x + b, columns are independent samples/tokens.
// ---------------------------------------------------------------------------

template <typename S>
struct DenseCache {
  Mat<S> x;
};

template <typename S>
struct Dense {
  Tensor<S> w;
  Tensor<S> b;

  void init(const std::string& name, Eigen::Index out, Eigen::Index in, Rng& rng,
            int group = kBackbone) {
    w.init(name + ".w", out, in, group);
    b.init(name + ".b", out, 1, group);
    xavier_init(w.value, rng, in, out);
  }

  TensorList<S> params() { return {&w, &b}; }

  Mat<S> forward(const Mat<S>& x, DenseCache<S>* cache = nullptr) const {
    contract_check(x.rows() == w.value.cols(), "dense " + w.name + ": input dim mismatch");
    if (cache) cache->x = x;
    Mat<S> y = w.value * x;
    y.colwise() += Vec<S>(b.value.col(0));
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const DenseCache<S>& cache) {
    w.grad.noalias() += dy * cache.x.transpose();
    b.grad.col(0).noalias() += dy.rowwise().sum();
    return w.value.transpose() * dy;
  }
};

// ---------------------------------------------------------------------------
// Layer norm over the feature dimension (rows), per column.
// ---------------------------------------------------------------------------

template <typename S>
struct LayerNormCache {
  Mat<S> xhat;
  Vec<S> rstd;
};

template <typename S>
struct LayerNorm {
  Tensor<S> gamma;
  Tensor<S> beta;
  static constexpr double kEps = 1e-5;

  void init(const std::string& name, Eigen::Index dim, int group = kBackbone) {
    gamma.init(name + ".gamma", dim, 1, group);
    beta.init(name + ".beta", dim, 1, group);
    gamma.value.setOnes();
  }

  TensorList<S> params() { return {&gamma, &beta}; }

  Mat<S> forward(const Mat<S>& x, LayerNormCache<S>* cache = nullptr) const {
    const Eigen::Index n = x.rows();
    Mat<S> xhat(x.rows(), x.cols());
    Vec<S> rstd(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      S mu = x.col(j).mean();
      Vec<S> centered = x.col(j).array() - mu;
      S var = centered.squaredNorm() / static_cast<S>(n);
      S rs = S(1) / std::sqrt(var + static_cast<S>(kEps));
      xhat.col(j) = centered * rs;
      rstd(j) = rs;
    }
    if (cache) {
      cache->xhat = xhat;
      cache->rstd = rstd;
    }
    Mat<S> y = xhat.array().colwise() * gamma.value.col(0).array();
    y.colwise() += Vec<S>(beta.value.col(0));
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const LayerNormCache<S>& cache) {
    const Eigen::Index n = cache.xhat.rows();
    gamma.grad.col(0).noalias() += dy.cwiseProduct(cache.xhat).rowwise().sum();
    beta.grad.col(0).noalias() += dy.rowwise().sum();
    Mat<S> dx(dy.rows(), dy.cols());
    for (Eigen::Index j = 0; j < dy.cols(); ++j) {
      Vec<S> dxhat = dy.col(j).cwiseProduct(gamma.value.col(0));
      S m1 = dxhat.mean();
      S m2 = dxhat.cwiseProduct(cache.xhat.col(j)).mean();
      dx.col(j) = cache.rstd(j) *
                  (dxhat.array() - m1 - cache.xhat.col(j).array() * m2).matrix();
      (void)n;
    }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// Multi-head self-attention over fixed-length sequences. Activations are laid
// out as (width, batch*seq_len) with the tokens of each item contiguous.
// ---------------------------------------------------------------------------

template <typename S>
struct AttentionCache {
  Mat<S> q, k, v;
  std::vector<Mat<S>> attn;  // one (T x T) row-softmax per (item, head)
  DenseCache<S> qkv_cache;
  DenseCache<S> out_cache;
};

template <typename S>
struct MultiHeadAttention {
  Dense<S> qkv;  // width -> 3*width
  Dense<S> out;  // width -> width
  int heads = 1;
  int width = 0;

  void init(const std::string& name, int w, int h, Rng& rng, int group = kBackbone) {
    contract_check(w % h == 0, "attention width must divide heads");
    width = w;
    heads = h;
    qkv.init(name + ".qkv", 3 * w, w, rng, group);
    out.init(name + ".out", w, w, rng, group);
  }

  TensorList<S> params() {
    TensorList<S> ps;
    for (auto* p : qkv.params()) ps.push_back(p);
    for (auto* p : out.params()) ps.push_back(p);
    return ps;
  }

  Mat<S> forward(const Mat<S>& x, Eigen::Index seq_len,
                 AttentionCache<S>* cache = nullptr) const {
    contract_check(x.cols() % seq_len == 0, "attention: ragged batch");
    const Eigen::Index batch = x.cols() / seq_len;
    const Eigen::Index dk = width / heads;
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk)));

    Mat<S> qkv_out = qkv.forward(x, cache ? &cache->qkv_cache : nullptr);
    Mat<S> q = qkv_out.topRows(width);
    Mat<S> k = qkv_out.middleRows(width, width);
    Mat<S> v = qkv_out.bottomRows(width);

    Mat<S> ctx(width, x.cols());
    std::vector<Mat<S>> attn;
    if (cache) attn.reserve(static_cast<std::size_t>(batch * heads));
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        auto qh = q.block(h * dk, b * seq_len, dk, seq_len);
        auto kh = k.block(h * dk, b * seq_len, dk, seq_len);
        auto vh = v.block(h * dk, b * seq_len, dk, seq_len);
        Mat<S> scores = (qh.transpose() * kh) * scale;  // (T x T), row i = query i
        // row-wise softmax
        for (Eigen::Index i = 0; i < scores.rows(); ++i) {
          S mx = scores.row(i).maxCoeff();
          scores.row(i) = (scores.row(i).array() - mx).exp();
          scores.row(i) /= scores.row(i).sum();
        }
        ctx.block(h * dk, b * seq_len, dk, seq_len) = vh * scores.transpose();
        if (cache) attn.push_back(scores);
      }
    }
    if (cache) {
      cache->q = std::move(q);
      cache->k = std::move(k);
      cache->v = std::move(v);
      cache->attn = std::move(attn);
    }
    return out.forward(ctx, cache ? &cache->out_cache : nullptr);
  }

  Mat<S> backward(const Mat<S>& dy, Eigen::Index seq_len, const AttentionCache<S>& cache) {
    const Eigen::Index batch = dy.cols() / seq_len;
    const Eigen::Index dk = width / heads;
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk)));

    Mat<S> dctx = out.backward(dy, cache.out_cache);
    Mat<S> dq = Mat<S>::Zero(width, dy.cols());
    Mat<S> dk_m = Mat<S>::Zero(width, dy.cols());
    Mat<S> dv = Mat<S>::Zero(width, dy.cols());

    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        const Mat<S>& attn = cache.attn[static_cast<std::size_t>(b * heads + h)];
        auto qh = cache.q.block(h * dk, b * seq_len, dk, seq_len);
        auto kh = cache.k.block(h * dk, b * seq_len, dk, seq_len);
        auto vh = cache.v.block(h * dk, b * seq_len, dk, seq_len);
        auto dctx_h = dctx.block(h * dk, b * seq_len, dk, seq_len);

        // ctx = V * attn^T
        dv.block(h * dk, b * seq_len, dk, seq_len).noalias() += dctx_h * attn;
        Mat<S> dattn = dctx_h.transpose() * vh;  // (T x T), matches attn layout
        // softmax backward per row
        Mat<S> dscores(seq_len, seq_len);
        for (Eigen::Index i = 0; i < seq_len; ++i) {
          S dot = dattn.row(i).cwiseProduct(attn.row(i)).sum();
          dscores.row(i) = (dattn.row(i).array() - dot) * attn.row(i).array();
        }
        dscores *= scale;
        dq.block(h * dk, b * seq_len, dk, seq_len).noalias() += kh * dscores.transpose();
        dk_m.block(h * dk, b * seq_len, dk, seq_len).noalias() += qh * dscores;
      }
    }
    Mat<S> dqkv(3 * width, dy.cols());
    dqkv.topRows(width) = dq;
    dqkv.middleRows(width, width) = dk_m;
    dqkv.bottomRows(width) = dv;
    return qkv.backward(dqkv, cache.qkv_cache);
  }
};

// ---------------------------------------------------------------------------
// Bottleneck adapter: x + U * relu(D * x). U starts at zero so a freshly
// added adapter is the identity.
// ---------------------------------------------------------------------------

template <typename S>
struct AdapterCache {
  DenseCache<S> down_cache;
  ReluCache<S> relu_cache;
  DenseCache<S> up_cache;
};

template <typename S>
struct Adapter {
  Dense<S> down;
  Dense<S> up;

  void init(const std::string& name, Eigen::Index width, Eigen::Index rank, Rng& rng) {
    down.init(name + ".down", rank, width, rng, kAdapter);
    up.init(name + ".up", width, rank, rng, kAdapter);
    up.w.value.setZero();
  }

  TensorList<S> params() {
    TensorList<S> ps;
    for (auto* p : down.params()) ps.push_back(p);
    for (auto* p : up.params()) ps.push_back(p);
    return ps;
  }

  Mat<S> forward(const Mat<S>& x, AdapterCache<S>* cache = nullptr) const {
    Mat<S> h = down.forward(x, cache ? &cache->down_cache : nullptr);
    h = relu(h, cache ? &cache->relu_cache : nullptr);
    return x + up.forward(h, cache ? &cache->up_cache : nullptr);
  }

  Mat<S> backward(const Mat<S>& dy, const AdapterCache<S>& cache) {
    Mat<S> dh = up.backward(dy, cache.up_cache);
    dh = relu_backward(dh, cache.relu_cache);
    return dy + down.backward(dh, cache.down_cache);
  }
};

// ---------------------------------------------------------------------------
// Pre-norm transformer block with a 4x GELU MLP and an optional adapter.
// ---------------------------------------------------------------------------

template <typename S>
struct BlockCache {
  LayerNormCache<S> ln1_cache;
  AttentionCache<S> attn_cache;
  LayerNormCache<S> ln2_cache;
  DenseCache<S> fc1_cache;
  GeluCache<S> gelu_cache;
  DenseCache<S> fc2_cache;
  AdapterCache<S> adapter_cache;
};

template <typename S>
struct TransformerBlock {
  LayerNorm<S> ln1;
  MultiHeadAttention<S> attn;
  LayerNorm<S> ln2;
  Dense<S> fc1;
  Dense<S> fc2;
  Adapter<S> adapter;
  bool has_adapter = false;

  void init(const std::string& name, int width, int heads, Rng& rng,
            int group = kBackbone) {
    ln1.init(name + ".ln1", width, group);
    attn.init(name + ".attn", width, heads, rng, group);
    ln2.init(name + ".ln2", width, group);
    fc1.init(name + ".fc1", 4 * width, width, rng, group);
    fc2.init(name + ".fc2", width, 4 * width, rng, group);
  }

  void add_adapter(const std::string& name, Eigen::Index rank, Rng& rng) {
    adapter.init(name + ".adapter", attn.width, rank, rng);
    has_adapter = true;
  }

  TensorList<S> params(bool include_adapter = true) {
    TensorList<S> ps;
    for (auto* p : ln1.params()) ps.push_back(p);
    for (auto* p : attn.params()) ps.push_back(p);
    for (auto* p : ln2.params()) ps.push_back(p);
    for (auto* p : fc1.params()) ps.push_back(p);
    for (auto* p : fc2.params()) ps.push_back(p);
    if (has_adapter && include_adapter)
      for (auto* p : adapter.params()) ps.push_back(p);
    return ps;
  }

  Mat<S> forward(const Mat<S>& x, Eigen::Index seq_len,
                 BlockCache<S>* cache = nullptr) const {
    Mat<S> h = x + attn.forward(ln1.forward(x, cache ? &cache->ln1_cache : nullptr),
                                seq_len, cache ? &cache->attn_cache : nullptr);
    Mat<S> m = fc1.forward(ln2.forward(h, cache ? &cache->ln2_cache : nullptr),
                           cache ? &cache->fc1_cache : nullptr);
    m = gelu(m, cache ? &cache->gelu_cache : nullptr);
    Mat<S> y = h + fc2.forward(m, cache ? &cache->fc2_cache : nullptr);
    if (has_adapter) y = adapter.forward(y, cache ? &cache->adapter_cache : nullptr);
    return y;
  }

  Mat<S> backward(const Mat<S>& dy_in, Eigen::Index seq_len, const BlockCache<S>& cache) {
    Mat<S> dy = dy_in;
    if (has_adapter) dy = adapter.backward(dy, cache.adapter_cache);
    Mat<S> dm = fc2.backward(dy, cache.fc2_cache);
    dm = gelu_backward(dm, cache.gelu_cache);
    Mat<S> dh = dy + ln2.backward(fc1.backward(dm, cache.fc1_cache), cache.ln2_cache);
    Mat<S> dx = dh + ln1.backward(attn.backward(dh, seq_len, cache.attn_cache),
                                  cache.ln1_cache);
    return dx;
  }
};

// ---------------------------------------------------------------------------
// Embedding table stored as (width, count); column i is the vector for id i.
// ---------------------------------------------------------------------------

template <typename S>
struct Embedding {
  Tensor<S> table;

  void init(const std::string& name, Eigen::Index width, Eigen::Index count, Rng& rng,
            double stddev = 0.02, int group = kBackbone) {
    table.init(name, width, count, group);
    normal_init(table.value, rng, stddev);
  }

  TensorList<S> params() { return {&table}; }

  Mat<S> gather(const std::vector<int>& ids) const {
    Mat<S> out(table.value.rows(), static_cast<Eigen::Index>(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      contract_check(ids[i] >= 0 && ids[i] < table.value.cols(),
                     "embedding " + table.name + ": id out of range");
      out.col(static_cast<Eigen::Index>(i)) = table.value.col(ids[i]);
    }
    return out;
  }

  void scatter_grad(const std::vector<int>& ids, const Mat<S>& dy) {
    for (std::size_t i = 0; i < ids.size(); ++i)
      table.grad.col(ids[i]) += dy.col(static_cast<Eigen::Index>(i));
  }
};

// ---------------------------------------------------------------------------
// 3x3/stride convolutions via im2col. Feature maps are (channels, H*W) with
// row-major spatial indexing.
// ---------------------------------------------------------------------------

template <typename S>
struct Conv2dCache {
  Mat<S> cols;
  int in_h = 0, in_w = 0;
};

template <typename S>
struct Conv2d {
  Tensor<S> w;  // (out_ch, in_ch * k * k)
  Tensor<S> b;  // (out_ch, 1)
  int in_ch = 0, out_ch = 0, kernel = 3, stride = 1, pad = 1;

  void init(const std::string& name, int in_c, int out_c, int k, int s, int p, Rng& rng,
            int group = kBackbone) {
    in_ch = in_c;
    out_ch = out_c;
    kernel = k;
    stride = s;
    pad = p;
    w.init(name + ".w", out_c, static_cast<Eigen::Index>(in_c) * k * k, group);
    b.init(name + ".b", out_c, 1, group);
    he_init(w.value, rng, static_cast<Eigen::Index>(in_c) * k * k);
  }

  TensorList<S> params() { return {&w, &b}; }

  int out_dim(int in_dim) const { return (in_dim + 2 * pad - kernel) / stride + 1; }

  Mat<S> im2col(const Mat<S>& x, int h, int w_in) const {
    const int oh = out_dim(h), ow = out_dim(w_in);
    Mat<S> cols = Mat<S>::Zero(static_cast<Eigen::Index>(in_ch) * kernel * kernel,
                               static_cast<Eigen::Index>(oh) * ow);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const Eigen::Index col = static_cast<Eigen::Index>(oy) * ow + ox;
        for (int c = 0; c < in_ch; ++c) {
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= w_in) continue;
              cols((static_cast<Eigen::Index>(c) * kernel + ky) * kernel + kx, col) =
                  x(c, static_cast<Eigen::Index>(iy) * w_in + ix);
            }
          }
        }
      }
    }
    return cols;
  }

  Mat<S> forward(const Mat<S>& x, int h, int w_in, Conv2dCache<S>* cache = nullptr) const {
    contract_check(x.rows() == in_ch && x.cols() == static_cast<Eigen::Index>(h) * w_in,
                   "conv " + w.name + ": input shape mismatch");
    Mat<S> cols = im2col(x, h, w_in);
    Mat<S> y = w.value * cols;
    y.colwise() += Vec<S>(b.value.col(0));
    if (cache) {
      cache->cols = std::move(cols);
      cache->in_h = h;
      cache->in_w = w_in;
    }
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const Conv2dCache<S>& cache) {
    w.grad.noalias() += dy * cache.cols.transpose();
    b.grad.col(0).noalias() += dy.rowwise().sum();
    Mat<S> dcols = w.value.transpose() * dy;
    // col2im
    const int h = cache.in_h, w_in = cache.in_w;
    const int oh = out_dim(h), ow = out_dim(w_in);
    Mat<S> dx = Mat<S>::Zero(in_ch, static_cast<Eigen::Index>(h) * w_in);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const Eigen::Index col = static_cast<Eigen::Index>(oy) * ow + ox;
        for (int c = 0; c < in_ch; ++c) {
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= w_in) continue;
              dx(c, static_cast<Eigen::Index>(iy) * w_in + ix) +=
                  dcols((static_cast<Eigen::Index>(c) * kernel + ky) * kernel + kx, col);
            }
          }
        }
      }
    }
    return dx;
  }
};

// Nearest-neighbour 2x upsample on (channels, H*W) maps.
template <typename S>
inline Mat<S> upsample2(const Mat<S>& x, int h, int w) {
  Mat<S> y(x.rows(), static_cast<Eigen::Index>(4) * h * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const auto src = x.col(static_cast<Eigen::Index>(r) * w + c);
      const int rr = 2 * r, cc = 2 * c, w2 = 2 * w;
      y.col(static_cast<Eigen::Index>(rr) * w2 + cc) = src;
      y.col(static_cast<Eigen::Index>(rr) * w2 + cc + 1) = src;
      y.col(static_cast<Eigen::Index>(rr + 1) * w2 + cc) = src;
      y.col(static_cast<Eigen::Index>(rr + 1) * w2 + cc + 1) = src;
    }
  }
  return y;
}

template <typename S>
inline Mat<S> upsample2_backward(const Mat<S>& dy, int h, int w) {
  Mat<S> dx(dy.rows(), static_cast<Eigen::Index>(h) * w);
  const int w2 = 2 * w;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int rr = 2 * r, cc = 2 * c;
      dx.col(static_cast<Eigen::Index>(r) * w + c) =
          dy.col(static_cast<Eigen::Index>(rr) * w2 + cc) +
          dy.col(static_cast<Eigen::Index>(rr) * w2 + cc + 1) +
          dy.col(static_cast<Eigen::Index>(rr + 1) * w2 + cc) +
          dy.col(static_cast<Eigen::Index>(rr + 1) * w2 + cc + 1);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Numerically stable binary cross-entropy on a logit.
template <typename S>
inline S bce_with_logit(S logit, int label) {
  contract_check(label == 0 || label == 1, "bce: label must be 0 or 1");
  S z = logit;
  S y = static_cast<S>(label);
  return std::max(z, S(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
}

template <typename S>
inline S bce_with_logit_grad(S logit, int label) {
  return sigmoid_scalar(logit) - static_cast<S>(label);
}

// Softmax cross-entropy over columns of a logits matrix. Columns whose
// target is negative are ignored. Returns mean loss over active columns and
// writes dlogits (already scaled by 1/n_active).
template <typename S>
inline S softmax_xent(const Mat<S>& logits, const std::vector<int>& targets,
                      Mat<S>* dlogits) {
  contract_check(static_cast<Eigen::Index>(targets.size()) == logits.cols(),
                 "softmax_xent: target count mismatch");
  Eigen::Index active = 0;
  for (int t : targets)
    if (t >= 0) ++active;
  contract_check(active > 0, "softmax_xent: no active targets");
  if (dlogits) *dlogits = Mat<S>::Zero(logits.rows(), logits.cols());
  S total = S(0);
  const S inv = S(1) / static_cast<S>(active);
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const int t = targets[static_cast<std::size_t>(j)];
    if (t < 0) continue;
    Vec<S> col = logits.col(j);
    S mx = col.maxCoeff();
    Vec<S> e = (col.array() - mx).exp();
    S z = e.sum();
    total += -(col(t) - mx - std::log(z));
    if (dlogits) {
      Vec<S> p = e / z;
      p(t) -= S(1);
      dlogits->col(j) = p * inv;
    }
  }
  return total * inv;
}

template <typename S>
inline Vec<S> softmax_vec(const Vec<S>& logits) {
  S mx = logits.maxCoeff();
  Vec<S> e = (logits.array() - mx).exp();
  return e / e.sum();
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <typename S>
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // 0 disables clipping
};

template <typename S>
class Adam {
 public:
  explicit Adam(AdamConfig<S> cfg = {}) : cfg_(cfg) {}

  // Updates only tensors whose group appears in lr_by_group; everything else
  // is untouched byte for byte.
  void step(const TensorList<S>& tensors, const std::vector<std::pair<int, double>>& lr_by_group) {
    ++t_;
    if (cfg_.clip_norm > 0.0) {
      double sq = 0.0;
      for (auto* p : tensors) {
        if (!has_group(lr_by_group, p->group)) continue;
        sq += static_cast<double>(p->grad.squaredNorm());
      }
      double norm = std::sqrt(sq);
      if (norm > cfg_.clip_norm && norm > 0.0) {
        const S scale = static_cast<S>(cfg_.clip_norm / norm);
        for (auto* p : tensors) {
          if (!has_group(lr_by_group, p->group)) continue;
          p->grad *= scale;
        }
      }
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (auto* p : tensors) {
      double lr;
      if (!group_lr(lr_by_group, p->group, &lr)) continue;
      const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
      p->m = b1 * p->m + (S(1) - b1) * p->grad;
      p->v = b2 * p->v + (S(1) - b2) * p->grad.cwiseProduct(p->grad);
      Mat<S> mhat = p->m / static_cast<S>(bc1);
      Mat<S> vhat = p->v / static_cast<S>(bc2);
      p->value -=
          (static_cast<S>(lr) * mhat.array() / (vhat.array().sqrt() + static_cast<S>(cfg_.eps)))
              .matrix();
    }
  }

  long steps_taken() const { return t_; }

 private:
  static bool has_group(const std::vector<std::pair<int, double>>& lrs, int g) {
    for (const auto& [grp, lr] : lrs)
      if (grp == g) return true;
    return false;
  }
  static bool group_lr(const std::vector<std::pair<int, double>>& lrs, int g, double* out) {
    for (const auto& [grp, lr] : lrs) {
      if (grp == g) {
        *out = lr;
        return true;
      }
    }
    return false;
  }

  AdamConfig<S> cfg_;
  long t_ = 0;
};

// Throws NumericError when a loss goes non-finite; callers surface this as a
// numeric-failure exit.
template <typename S>
inline void check_finite(S loss, const std::string& where) {
  if (!std::isfinite(static_cast<double>(loss)))
    throw NumericError("non-finite loss in " + where);
}

}  // namespace damagen::nn
