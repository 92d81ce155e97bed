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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "damagen/core/errors.hpp"
#include "damagen/core/image.hpp"
#include "damagen/core/nn.hpp"
#include "damagen/core/rng.hpp"
#include "damagen/core/serialize.hpp"

// Toy vector-quantized image codec: a small convolutional encoder/decoder
// around a learned codebook, trained with reconstruction + codebook +
// commitment losses and a straight-through estimator.

namespace damagen::vqcodec {

using nn::Mat;
using nn::Vec;

struct TokenGrid {
  int rows = 0, cols = 0;
  std::vector<int> ids;  // values in [0, K) plus the reserved MASK id

  int at(int r, int c) const { return ids[static_cast<std::size_t>(r) * cols + c]; }
  int& at(int r, int c) { return ids[static_cast<std::size_t>(r) * cols + c]; }
  bool operator==(const TokenGrid& o) const {
    return rows == o.rows && cols == o.cols && ids == o.ids;
  }
};

struct CodecConfig {
  int image_size = 64;
  int factor = 8;  // fixed by the three stride-2 stages below
  int codebook_size = 128;
  int embed_dim = 16;
  int steps = 1500;
  int batch_size = 32;
  double lr = 1e-3;
  double commitment = 0.25;
  int reseed_every = 150;  // dead codebook entries are re-seeded at this cadence
  int holdout = 128;       // images reserved for the reconstruction threshold
  std::uint64_t seed = 0;

  void validate() const {
    config_check(image_size > 0 && image_size % 16 == 0, "codec: image_size must be divisible by 16");
    config_check(factor == 8, "codec: this architecture has a fixed factor of 8");
    config_check(codebook_size >= 2, "codec: codebook_size must be >= 2");
    config_check(embed_dim >= 1, "codec: embed_dim must be >= 1");
    config_check(steps >= 1 && batch_size >= 1, "codec: steps and batch_size must be positive");
  }

  nlohmann::json to_json() const {
    return {{"image_size", image_size}, {"factor", factor},
            {"codebook_size", codebook_size}, {"embed_dim", embed_dim},
            {"steps", steps}, {"batch_size", batch_size}, {"lr", lr},
            {"commitment", commitment}, {"reseed_every", reseed_every},
            {"holdout", holdout}, {"seed", seed}};
  }
  static CodecConfig from_json(const nlohmann::json& j) {
    CodecConfig c;
    c.image_size = j.value("image_size", c.image_size);
    c.factor = j.value("factor", c.factor);
    c.codebook_size = j.value("codebook_size", c.codebook_size);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.commitment = j.value("commitment", c.commitment);
    c.reseed_every = j.value("reseed_every", c.reseed_every);
    c.holdout = j.value("holdout", c.holdout);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

struct Codebook {
  nn::Tensor<float> table;  // (embed_dim, K); column k is entry k

  int size() const { return static_cast<int>(table.value.cols()); }
  int embed_dim() const { return static_cast<int>(table.value.rows()); }
  int mask_id() const { return size(); }  // reserved, never produced by quantize
};

struct CodecModel {
  CodecConfig config;
  nn::Conv2d<float> enc1, enc2, enc3, enc4, enc5;
  nn::Conv2d<float> dec1, dec2, dec3, dec4, dec5, dec6;
  Codebook codebook;

  int token_rows() const { return config.image_size / config.factor; }
  int token_cols() const { return config.image_size / config.factor; }

  void init(const CodecConfig& cfg, Rng& rng) {
    config = cfg;
    config.validate();
    enc1.init("enc1", 3, 32, 3, 2, 1, rng);
    enc2.init("enc2", 32, 64, 3, 2, 1, rng);
    enc3.init("enc3", 64, 96, 3, 2, 1, rng);
    enc4.init("enc4", 96, 96, 3, 1, 1, rng);
    enc5.init("enc5", 96, cfg.embed_dim, 1, 1, 0, rng);
    dec1.init("dec1", cfg.embed_dim, 64, 1, 1, 0, rng);
    dec2.init("dec2", 64, 64, 3, 1, 1, rng);
    dec3.init("dec3", 64, 48, 3, 1, 1, rng);
    dec4.init("dec4", 48, 32, 3, 1, 1, rng);
    dec5.init("dec5", 32, 16, 3, 1, 1, rng);
    dec6.init("dec6", 16, 3, 3, 1, 1, rng);
    codebook.table.init("codebook", cfg.embed_dim, cfg.codebook_size, nn::kBackbone);
    nn::normal_init(codebook.table.value, rng, 0.25);
  }

  nn::TensorList<float> params() {
    nn::TensorList<float> ps;
    for (auto* layer : {&enc1, &enc2, &enc3, &enc4, &enc5, &dec1, &dec2, &dec3, &dec4,
                        &dec5, &dec6})
      for (auto* p : layer->params()) ps.push_back(p);
    ps.push_back(&codebook.table);
    return ps;
  }
};

inline Mat<float> image_to_planes(const Image& img) {
  Mat<float> x(3, static_cast<Eigen::Index>(img.height) * img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < 3; ++ch)
        x(ch, static_cast<Eigen::Index>(r) * img.width + c) =
            static_cast<float>(img.at(r, c, ch)) / 255.0f;
  return x;
}

inline Image planes_to_image(const Mat<float>& x, int height, int width) {
  contract_check(x.rows() == 3 && x.cols() == static_cast<Eigen::Index>(height) * width,
                 "planes_to_image: shape mismatch");
  Image img(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        const float v = x(ch, static_cast<Eigen::Index>(r) * width + c);
        img.at(r, c, ch) = static_cast<std::uint8_t>(
            std::clamp(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f), 0l, 255l));
      }
  return img;
}

namespace detail {

struct EncodeCache {
  nn::Conv2dCache<float> c1, c2, c3, c4, c5;
  nn::ReluCache<float> r1, r2, r3, r4;
};

struct DecodeCache {
  nn::Conv2dCache<float> c1, c2, c3, c4, c5, c6;
  nn::ReluCache<float> r1, r2, r3, r4, r5;
  Mat<float> sigmoid_out;
};

inline Mat<float> encode_planes(const CodecModel& m, const Mat<float>& x,
                                EncodeCache* cache) {
  const int s = m.config.image_size;
  Mat<float> h = nn::relu(m.enc1.forward(x, s, s, cache ? &cache->c1 : nullptr),
                          cache ? &cache->r1 : nullptr);
  h = nn::relu(m.enc2.forward(h, s / 2, s / 2, cache ? &cache->c2 : nullptr),
               cache ? &cache->r2 : nullptr);
  h = nn::relu(m.enc3.forward(h, s / 4, s / 4, cache ? &cache->c3 : nullptr),
               cache ? &cache->r3 : nullptr);
  h = nn::relu(m.enc4.forward(h, s / 8, s / 8, cache ? &cache->c4 : nullptr),
               cache ? &cache->r4 : nullptr);
  return m.enc5.forward(h, s / 8, s / 8, cache ? &cache->c5 : nullptr);
}

inline Mat<float> encode_backward(CodecModel& m, const Mat<float>& dz, EncodeCache& cache) {
  Mat<float> d = m.enc5.backward(dz, cache.c5);
  d = m.enc4.backward(nn::relu_backward(d, cache.r4), cache.c4);
  d = m.enc3.backward(nn::relu_backward(d, cache.r3), cache.c3);
  d = m.enc2.backward(nn::relu_backward(d, cache.r2), cache.c2);
  return m.enc1.backward(nn::relu_backward(d, cache.r1), cache.c1);
}

inline Mat<float> decode_planes(const CodecModel& m, const Mat<float>& zq,
                                DecodeCache* cache) {
  const int t = m.token_rows();
  Mat<float> h = nn::relu(m.dec1.forward(zq, t, t, cache ? &cache->c1 : nullptr),
                          cache ? &cache->r1 : nullptr);
  h = nn::relu(m.dec2.forward(h, t, t, cache ? &cache->c2 : nullptr),
               cache ? &cache->r2 : nullptr);
  h = nn::upsample2(h, t, t);
  h = nn::relu(m.dec3.forward(h, 2 * t, 2 * t, cache ? &cache->c3 : nullptr),
               cache ? &cache->r3 : nullptr);
  h = nn::upsample2(h, 2 * t, 2 * t);
  h = nn::relu(m.dec4.forward(h, 4 * t, 4 * t, cache ? &cache->c4 : nullptr),
               cache ? &cache->r4 : nullptr);
  h = nn::upsample2(h, 4 * t, 4 * t);
  h = nn::relu(m.dec5.forward(h, 8 * t, 8 * t, cache ? &cache->c5 : nullptr),
               cache ? &cache->r5 : nullptr);
  h = m.dec6.forward(h, 8 * t, 8 * t, cache ? &cache->c6 : nullptr);
  Mat<float> out = h.unaryExpr([](float v) { return nn::sigmoid_scalar(v); });
  if (cache) cache->sigmoid_out = out;
  return out;
}

inline Mat<float> decode_backward(CodecModel& m, const Mat<float>& dout,
                                  DecodeCache& cache) {
  const int t = m.token_rows();
  Mat<float> d = dout.cwiseProduct(cache.sigmoid_out.unaryExpr(
      [](float y) { return y * (1.0f - y); }));
  d = m.dec6.backward(d, cache.c6);
  d = m.dec5.backward(nn::relu_backward(d, cache.r5), cache.c5);
  d = nn::upsample2_backward(d, 4 * t, 4 * t);
  d = m.dec4.backward(nn::relu_backward(d, cache.r4), cache.c4);
  d = nn::upsample2_backward(d, 2 * t, 2 * t);
  d = m.dec3.backward(nn::relu_backward(d, cache.r3), cache.c3);
  d = nn::upsample2_backward(d, t, t);
  d = m.dec2.backward(nn::relu_backward(d, cache.r2), cache.c2);
  return m.dec1.backward(nn::relu_backward(d, cache.r1), cache.c1);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// (H/f x W/f) feature grid as an (embed_dim, cells) matrix, row-major cells.
inline Mat<float> encode(const CodecModel& model, const Image& img) {
  contract_check(img.height == model.config.image_size &&
                     img.width == model.config.image_size,
                 "encode: image size mismatch");
  return detail::encode_planes(model, image_to_planes(img), nullptr);
}

// Nearest codebook entry by squared Euclidean distance; ties take the lowest
// index. Distances use the |e|^2 - 2 z.e expansion with a per-cell argmin.
inline TokenGrid quantize(const Mat<float>& features, const Codebook& codebook,
                          int rows, int cols) {
  contract_check(features.rows() == codebook.table.value.rows(),
                 "quantize: embedding dimension mismatch");
  contract_check(features.cols() == static_cast<Eigen::Index>(rows) * cols,
                 "quantize: cell count mismatch");
  const auto& table = codebook.table.value;
  Vec<float> sq = table.colwise().squaredNorm();
  Mat<float> scores = table.transpose() * features;  // (K, cells)
  TokenGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.ids.resize(static_cast<std::size_t>(rows) * cols);
  for (Eigen::Index cell = 0; cell < features.cols(); ++cell) {
    int best = 0;
    float best_d = sq(0) - 2.0f * scores(0, cell);
    for (int k = 1; k < codebook.size(); ++k) {
      const float d = sq(k) - 2.0f * scores(k, cell);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    grid.ids[static_cast<std::size_t>(cell)] = best;
  }
  return grid;
}

inline Mat<float> lookup(const Codebook& codebook, const TokenGrid& tokens) {
  Mat<float> z(codebook.embed_dim(), static_cast<Eigen::Index>(tokens.ids.size()));
  for (std::size_t i = 0; i < tokens.ids.size(); ++i) {
    const int id = tokens.ids[i];
    contract_check(id >= 0 && id < codebook.size(),
                   "lookup: token id out of codebook range");
    z.col(static_cast<Eigen::Index>(i)) = codebook.table.value.col(id);
  }
  return z;
}

inline Image decode(const CodecModel& model, const TokenGrid& tokens) {
  contract_check(tokens.rows == model.token_rows() && tokens.cols == model.token_cols(),
                 "decode: token grid shape mismatch");
  for (int id : tokens.ids)
    contract_check(id != model.codebook.mask_id(),
                   "decode: grid contains the MASK id; decoding needs a complete grid");
  Mat<float> zq = lookup(model.codebook, tokens);
  Mat<float> out = detail::decode_planes(model, zq, nullptr);
  return planes_to_image(out, model.config.image_size, model.config.image_size);
}

inline TokenGrid tokenize_image(const CodecModel& model, const Image& img) {
  return quantize(encode(model, img), model.codebook, model.token_rows(),
                  model.token_cols());
}

struct CodecTrainResult {
  std::vector<double> loss_curve;     // every 10th step
  double final_loss = 0.0;
  double initial_loss = 0.0;
  double holdout_mse = 0.0;
  double mse_threshold = 0.0;         // recorded bound for acceptance checks
  double codebook_usage = 0.0;        // fraction of entries used on holdout
};

// VQ training with straight-through gradients; the codebook learns from the
// codebook loss (no EMA). Entries unused for a full reseed window are
// re-seeded from current encoder outputs.
inline CodecTrainResult train_codec(CodecModel& model, const std::vector<Image>& dataset,
                                    const CodecConfig& cfg) {
  config_check(!dataset.empty(), "train_codec: empty dataset");
  Rng rng(derive_seed(cfg.seed, "codec-train"));
  Rng init_rng(derive_seed(cfg.seed, "codec-init"));
  model.init(cfg, init_rng);

  const int holdout = std::min<int>(cfg.holdout, static_cast<int>(dataset.size()) / 4);
  const int train_n = static_cast<int>(dataset.size()) - holdout;
  config_check(train_n >= 1, "train_codec: dataset too small for holdout");

  nn::Adam<float> adam(nn::AdamConfig<float>{0.9, 0.999, 1e-8, 1.0});
  auto params = model.params();
  CodecTrainResult result;
  std::vector<long> usage(static_cast<std::size_t>(cfg.codebook_size), 0);

  const float beta = static_cast<float>(cfg.commitment);
  for (int step = 0; step < cfg.steps; ++step) {
    nn::zero_grads(params);
    double loss_acc = 0.0;
    Mat<float> last_ze;  // encoder outputs for dead-code reseeding
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto idx = static_cast<std::size_t>(rng.uniform_int(0, train_n - 1));
      Mat<float> x = image_to_planes(dataset[idx]);
      detail::EncodeCache enc_cache;
      Mat<float> ze = detail::encode_planes(model, x, &enc_cache);
      TokenGrid ids = quantize(ze, model.codebook, model.token_rows(), model.token_cols());
      for (int id : ids.ids) ++usage[static_cast<std::size_t>(id)];
      Mat<float> zq = lookup(model.codebook, ids);

      detail::DecodeCache dec_cache;
      Mat<float> recon = detail::decode_planes(model, zq, &dec_cache);
      Mat<float> diff = recon - x;
      const auto n_px = static_cast<float>(diff.size());
      const auto n_z = static_cast<float>(ze.size());
      Mat<float> zdiff = ze - zq;
      const double recon_loss = diff.squaredNorm() / n_px;
      const double cb_loss = zdiff.squaredNorm() / n_z;
      loss_acc += recon_loss + (1.0 + cfg.commitment) * cb_loss;

      // reconstruction gradient through the decoder
      Mat<float> drecon = (2.0f / n_px) * diff;
      Mat<float> dzq = detail::decode_backward(model, drecon, dec_cache);
      // codebook pulls toward encoder outputs
      for (std::size_t i = 0; i < ids.ids.size(); ++i)
        model.codebook.table.grad.col(ids.ids[i]) +=
            (2.0f / n_z) * (zq.col(static_cast<Eigen::Index>(i)) -
                            ze.col(static_cast<Eigen::Index>(i)));
      // straight-through + commitment into the encoder
      Mat<float> dze = dzq + (beta * 2.0f / n_z) * zdiff;
      detail::encode_backward(model, dze, enc_cache);
      last_ze = std::move(ze);
    }
    const float scale = 1.0f / static_cast<float>(cfg.batch_size);
    for (auto* p : params) p->grad *= scale;
    const double loss = loss_acc / cfg.batch_size;
    nn::check_finite(loss, "train_codec");
    if (step == 0) result.initial_loss = loss;
    if (step % 10 == 0 || step == cfg.steps - 1) result.loss_curve.push_back(loss);
    result.final_loss = loss;
    adam.step(params, {{nn::kBackbone, cfg.lr}});

    if (cfg.reseed_every > 0 && (step + 1) % cfg.reseed_every == 0 &&
        step + 1 < cfg.steps) {
      for (int k = 0; k < cfg.codebook_size; ++k) {
        if (usage[static_cast<std::size_t>(k)] > 0) continue;
        const auto src = static_cast<Eigen::Index>(rng.uniform_int(0, last_ze.cols() - 1));
        model.codebook.table.value.col(k) =
            last_ze.col(src) +
            0.01f * Vec<float>::NullaryExpr(last_ze.rows(), [&](Eigen::Index) {
              return static_cast<float>(rng.normal());
            });
        model.codebook.table.m.col(k).setZero();
        model.codebook.table.v.col(k).setZero();
      }
      std::fill(usage.begin(), usage.end(), 0l);
    }
  }

  // holdout reconstruction MSE and codebook usage
  std::vector<bool> used(static_cast<std::size_t>(cfg.codebook_size), false);
  double mse_acc = 0.0;
  const int eval_n = holdout > 0 ? holdout : std::min<int>(64, train_n);
  for (int i = 0; i < eval_n; ++i) {
    const auto& img = dataset[static_cast<std::size_t>(
        holdout > 0 ? train_n + i : i)];
    Mat<float> x = image_to_planes(img);
    Mat<float> ze = detail::encode_planes(model, x, nullptr);
    TokenGrid ids = quantize(ze, model.codebook, model.token_rows(), model.token_cols());
    for (int id : ids.ids) used[static_cast<std::size_t>(id)] = true;
    Mat<float> recon = detail::decode_planes(model, lookup(model.codebook, ids), nullptr);
    mse_acc += (recon - x).squaredNorm() / static_cast<double>(x.size());
  }
  result.holdout_mse = mse_acc / eval_n;
  result.mse_threshold = result.holdout_mse * 1.25;
  long used_count = std::count(used.begin(), used.end(), true);
  result.codebook_usage = static_cast<double>(used_count) / cfg.codebook_size;
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint IO: binary tensor archive + JSON sidecar.
// ---------------------------------------------------------------------------

inline void save_codec(CodecModel& model, const CodecTrainResult& result,
                       const std::string& dir) {
  ensure_dir(dir);
  save_tensors(model.params(), dir + "/codec.bin");
  nlohmann::json meta = {{"kind", "vqcodec"},
                         {"config", model.config.to_json()},
                         {"seed", model.config.seed},
                         {"initial_loss", result.initial_loss},
                         {"final_loss", result.final_loss},
                         {"holdout_mse", result.holdout_mse},
                         {"mse_threshold", result.mse_threshold},
                         {"codebook_usage", result.codebook_usage},
                         {"loss_curve", result.loss_curve}};
  write_json_file(meta, dir + "/codec.json");
}

inline CodecModel load_codec(const std::string& dir, nlohmann::json* meta_out = nullptr) {
  nlohmann::json meta = read_json_file(dir + "/codec.json");
  CodecModel model;
  Rng rng(0);
  model.init(CodecConfig::from_json(meta.at("config")), rng);
  load_tensors(model.params(), dir + "/codec.bin");
  if (meta_out) *meta_out = meta;
  return model;
}

inline std::string codec_hash(const std::string& dir) {
  return hash_file(dir + "/codec.bin");
}

}  // namespace damagen::vqcodec
