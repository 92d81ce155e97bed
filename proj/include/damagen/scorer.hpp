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
#include "damagen/prompts.hpp"
#include "damagen/vqcodec.hpp"

// Image-text similarity scorer: a small convolutional image encoder and a
// bag-of-embeddings text encoder projected into a shared unit sphere, trained
// with a symmetric in-batch contrastive objective. Ranks generation
// candidates against their prompt.

namespace damagen::scorer {

using nn::Mat;
using nn::Vec;

struct ScorerConfig {
  int image_size = 64;
  int embed_dim = 64;
  int vocab_words = 0;
  int prompt_len = prompts::kSeqLen;
  int steps = 1200;
  int batch_size = 24;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    config_check(image_size % 8 == 0, "scorer: image_size must be divisible by 8");
    config_check(embed_dim > 0 && vocab_words > 0, "scorer: bad dims or vocabulary");
  }

  nlohmann::json to_json() const {
    return {{"image_size", image_size}, {"embed_dim", embed_dim},
            {"vocab_words", vocab_words}, {"prompt_len", prompt_len},
            {"steps", steps}, {"batch_size", batch_size}, {"lr", lr}, {"seed", seed}};
  }
  static ScorerConfig from_json(const nlohmann::json& j) {
    ScorerConfig c;
    c.image_size = j.value("image_size", c.image_size);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.vocab_words = j.value("vocab_words", c.vocab_words);
    c.prompt_len = j.value("prompt_len", c.prompt_len);
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

struct ScorerModel {
  ScorerConfig config;
  nn::Conv2d<float> conv1, conv2, conv3;
  nn::Dense<float> img_proj;
  nn::Embedding<float> word_emb;
  nn::Dense<float> txt_fc, txt_proj;
  nn::Tensor<float> logit_scale;  // exp() is the contrastive temperature inverse

  void init(const ScorerConfig& cfg, Rng& rng) {
    config = cfg;
    config.validate();
    conv1.init("s.conv1", 3, 24, 3, 2, 1, rng);
    conv2.init("s.conv2", 24, 48, 3, 2, 1, rng);
    conv3.init("s.conv3", 48, cfg.embed_dim, 3, 2, 1, rng);
    img_proj.init("s.img_proj", cfg.embed_dim, cfg.embed_dim, rng);
    word_emb.init("s.word_emb", cfg.embed_dim, cfg.vocab_words + 2, rng);
    txt_fc.init("s.txt_fc", cfg.embed_dim, cfg.embed_dim, rng);
    txt_proj.init("s.txt_proj", cfg.embed_dim, cfg.embed_dim, rng);
    logit_scale.init("s.logit_scale", 1, 1, nn::kBackbone);
    logit_scale.value(0, 0) = std::log(1.0f / 0.07f);
  }

  nn::TensorList<float> params() {
    nn::TensorList<float> ps;
    for (auto* layer : {&conv1, &conv2, &conv3})
      for (auto* p : layer->params()) ps.push_back(p);
    for (auto* p : img_proj.params()) ps.push_back(p);
    for (auto* p : word_emb.params()) ps.push_back(p);
    for (auto* p : txt_fc.params()) ps.push_back(p);
    for (auto* p : txt_proj.params()) ps.push_back(p);
    ps.push_back(&logit_scale);
    return ps;
  }
};

namespace detail {

struct ImageCache {
  nn::Conv2dCache<float> c1, c2, c3;
  nn::ReluCache<float> r1, r2, r3;
  Eigen::Index pool_cols = 0;
  nn::DenseCache<float> proj_cache;
  Vec<float> pre_norm;
};

struct TextCache {
  std::vector<int> ids;
  std::vector<int> content;  // non-PAD positions
  nn::DenseCache<float> fc_cache;
  nn::ReluCache<float> relu_cache;
  nn::DenseCache<float> proj_cache;
  Vec<float> pre_norm;
};

inline Vec<float> l2_normalize(const Vec<float>& x, Vec<float>* pre_norm) {
  if (pre_norm) *pre_norm = x;
  const float n = x.norm();
  contract_check(n > 0.0f, "l2_normalize: zero vector");
  return x / n;
}

inline Vec<float> l2_normalize_backward(const Vec<float>& dy, const Vec<float>& pre_norm) {
  const float n = pre_norm.norm();
  Vec<float> unit = pre_norm / n;
  return (dy - unit * unit.dot(dy)) / n;
}

inline Vec<float> embed_image(const ScorerModel& m, const Image& img, ImageCache* cache) {
  contract_check(img.height == m.config.image_size && img.width == m.config.image_size,
                 "scorer: image size mismatch");
  const int s = m.config.image_size;
  Mat<float> x = vqcodec::image_to_planes(img);
  Mat<float> h = nn::relu(m.conv1.forward(x, s, s, cache ? &cache->c1 : nullptr),
                          cache ? &cache->r1 : nullptr);
  h = nn::relu(m.conv2.forward(h, s / 2, s / 2, cache ? &cache->c2 : nullptr),
               cache ? &cache->r2 : nullptr);
  h = nn::relu(m.conv3.forward(h, s / 4, s / 4, cache ? &cache->c3 : nullptr),
               cache ? &cache->r3 : nullptr);
  Vec<float> pooled = h.rowwise().mean();
  if (cache) cache->pool_cols = h.cols();
  Mat<float> proj = m.img_proj.forward(pooled, cache ? &cache->proj_cache : nullptr);
  return l2_normalize(proj.col(0), cache ? &cache->pre_norm : nullptr);
}

inline void embed_image_backward(ScorerModel& m, const Vec<float>& dy, ImageCache& cache) {
  Vec<float> dproj = l2_normalize_backward(dy, cache.pre_norm);
  Mat<float> dpooled = m.img_proj.backward(dproj, cache.proj_cache);
  Mat<float> dh = (dpooled.col(0) / static_cast<float>(cache.pool_cols))
                      .replicate(1, cache.pool_cols);
  dh = m.conv3.backward(nn::relu_backward(dh, cache.r3), cache.c3);
  dh = m.conv2.backward(nn::relu_backward(dh, cache.r2), cache.c2);
  m.conv1.backward(nn::relu_backward(dh, cache.r1), cache.c1);
}

inline Vec<float> embed_text(const ScorerModel& m, const std::vector<int>& prompt_ids,
                             TextCache* cache) {
  contract_check(static_cast<int>(prompt_ids.size()) == m.config.prompt_len,
                 "scorer: prompt length mismatch");
  const int pad_id = m.config.vocab_words + 1;
  std::vector<int> content;
  for (int id : prompt_ids)
    if (id != pad_id) content.push_back(id);
  if (content.empty()) content.push_back(prompts::kUnkId);
  Mat<float> bag = m.word_emb.gather(content);
  Vec<float> mean = bag.rowwise().mean();
  Mat<float> h = nn::relu(Mat<float>(m.txt_fc.forward(mean, cache ? &cache->fc_cache : nullptr)),
                          cache ? &cache->relu_cache : nullptr);
  Mat<float> proj = m.txt_proj.forward(h, cache ? &cache->proj_cache : nullptr);
  if (cache) {
    cache->ids = prompt_ids;
    cache->content = content;
  }
  return l2_normalize(proj.col(0), cache ? &cache->pre_norm : nullptr);
}

inline void embed_text_backward(ScorerModel& m, const Vec<float>& dy, TextCache& cache) {
  Vec<float> dproj = l2_normalize_backward(dy, cache.pre_norm);
  Mat<float> dh = m.txt_proj.backward(dproj, cache.proj_cache);
  dh = nn::relu_backward(dh, cache.relu_cache);
  Mat<float> dmean = m.txt_fc.backward(dh, cache.fc_cache);
  Mat<float> dbag = (dmean.col(0) / static_cast<float>(cache.content.size()))
                        .replicate(1, static_cast<Eigen::Index>(cache.content.size()));
  m.word_emb.scatter_grad(cache.content, dbag);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Cosine similarity of the unit-norm embeddings; always in [-1, 1].
inline double similarity(const ScorerModel& model, const Image& image,
                         const std::vector<int>& prompt_ids) {
  Vec<float> zi = detail::embed_image(model, image, nullptr);
  Vec<float> zt = detail::embed_text(model, prompt_ids, nullptr);
  return static_cast<double>(zi.dot(zt));
}

struct Selection {
  int index = 0;
  double score = 0.0;
  std::vector<double> all_scores;
};

// Argmax of similarity over the candidates; ties keep the lowest index.
inline Selection select_best(const ScorerModel& model, const std::vector<Image>& candidates,
                             const std::vector<int>& prompt_ids) {
  contract_check(!candidates.empty(), "select_best: empty candidate list");
  Vec<float> zt = detail::embed_text(model, prompt_ids, nullptr);
  Selection sel;
  sel.all_scores.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    Vec<float> zi = detail::embed_image(model, candidates[i], nullptr);
    const double s = static_cast<double>(zi.dot(zt));
    sel.all_scores.push_back(s);
    if (i == 0 || s > sel.score) {
      sel.score = s;
      sel.index = static_cast<int>(i);
    }
  }
  return sel;
}

struct ScorerExample {
  Image image;
  std::vector<int> prompt_ids;
  std::string prompt_text;  // used to keep in-batch negatives distinct
};

struct ScorerTrainResult {
  std::vector<double> loss_curve;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Symmetric contrastive training over in-batch negatives. Batches are drawn
// so that prompt texts within a batch are distinct; with a pool of a few
// dozen sentences, duplicate texts would otherwise poison the labels.
inline ScorerTrainResult train_scorer(ScorerModel& model,
                                      const std::vector<ScorerExample>& data,
                                      const ScorerConfig& cfg) {
  config_check(!data.empty(), "train_scorer: empty dataset");
  Rng init_rng(derive_seed(cfg.seed, "scorer-init"));
  model.init(cfg, init_rng);
  Rng rng(derive_seed(cfg.seed, "scorer-train"));
  nn::Adam<float> adam(nn::AdamConfig<float>{0.9, 0.999, 1e-8, 1.0});
  auto params = model.params();
  ScorerTrainResult result;

  for (int step = 0; step < cfg.steps; ++step) {
    nn::zero_grads(params);
    std::vector<std::size_t> batch;
    std::vector<std::string> seen;
    for (int attempt = 0; attempt < cfg.batch_size * 20 &&
                          static_cast<int>(batch.size()) < cfg.batch_size;
         ++attempt) {
      const auto idx = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1));
      if (std::find(seen.begin(), seen.end(), data[idx].prompt_text) != seen.end())
        continue;
      batch.push_back(idx);
      seen.push_back(data[idx].prompt_text);
    }
    const auto bsz = static_cast<Eigen::Index>(batch.size());
    contract_check(bsz >= 2, "train_scorer: could not assemble a contrastive batch");

    std::vector<detail::ImageCache> img_caches(batch.size());
    std::vector<detail::TextCache> txt_caches(batch.size());
    Mat<float> zi(cfg.embed_dim, bsz), zt(cfg.embed_dim, bsz);
    for (Eigen::Index b = 0; b < bsz; ++b) {
      const auto& ex = data[batch[static_cast<std::size_t>(b)]];
      zi.col(b) = detail::embed_image(model, ex.image, &img_caches[static_cast<std::size_t>(b)]);
      zt.col(b) = detail::embed_text(model, ex.prompt_ids, &txt_caches[static_cast<std::size_t>(b)]);
    }
    const float scale = std::exp(std::min(model.logit_scale.value(0, 0), 4.6f));
    Mat<float> logits = scale * (zi.transpose() * zt);  // (B, B): row=image, col=text

    // cross-entropy against the diagonal, both directions
    std::vector<int> diag(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) diag[i] = static_cast<int>(i);
    Mat<float> d_i2t, d_t2i;
    const double loss_i2t =
        nn::softmax_xent<float>(logits.transpose(), diag, &d_i2t);  // over texts per image
    const double loss_t2i = nn::softmax_xent<float>(logits, diag, &d_t2i);  // over images per text
    const double loss = 0.5 * (loss_i2t + loss_t2i);
    nn::check_finite(loss, "train_scorer");

    Mat<float> dlogits = 0.5f * (d_i2t.transpose() + d_t2i);
    // logits = scale * zi^T zt
    Mat<float> dzi = scale * (zt * dlogits.transpose());
    Mat<float> dzt = scale * (zi * dlogits);
    const float dscale = (dlogits.cwiseProduct(zi.transpose() * zt)).sum();
    if (model.logit_scale.value(0, 0) < 4.6f)
      model.logit_scale.grad(0, 0) += dscale * scale;  // d exp(s) = exp(s) ds

    for (Eigen::Index b = 0; b < bsz; ++b) {
      detail::embed_image_backward(model, dzi.col(b), img_caches[static_cast<std::size_t>(b)]);
      detail::embed_text_backward(model, dzt.col(b), txt_caches[static_cast<std::size_t>(b)]);
    }
    if (step == 0) result.initial_loss = loss;
    if (step % 10 == 0 || step == cfg.steps - 1) result.loss_curve.push_back(loss);
    result.final_loss = loss;
    adam.step(params, {{nn::kBackbone, cfg.lr}});
  }
  return result;
}

// Top-1 prompt retrieval over a fixed candidate prompt list.
inline double retrieval_accuracy(const ScorerModel& model,
                                 const std::vector<ScorerExample>& held_out,
                                 const std::vector<std::vector<int>>& candidate_prompts,
                                 const std::vector<std::string>& candidate_texts) {
  contract_check(candidate_prompts.size() == candidate_texts.size() &&
                     !candidate_prompts.empty(),
                 "retrieval_accuracy: bad candidate list");
  std::vector<Vec<float>> zts;
  zts.reserve(candidate_prompts.size());
  for (const auto& p : candidate_prompts)
    zts.push_back(detail::embed_text(model, p, nullptr));
  int hits = 0;
  for (const auto& ex : held_out) {
    Vec<float> zi = detail::embed_image(model, ex.image, nullptr);
    int best = 0;
    float best_s = zi.dot(zts[0]);
    for (std::size_t k = 1; k < zts.size(); ++k) {
      const float s = zi.dot(zts[k]);
      if (s > best_s) {
        best_s = s;
        best = static_cast<int>(k);
      }
    }
    if (candidate_texts[static_cast<std::size_t>(best)] == ex.prompt_text) ++hits;
  }
  return held_out.empty() ? 0.0 : static_cast<double>(hits) / held_out.size();
}

// ---------------------------------------------------------------------------
// Checkpoint IO
// ---------------------------------------------------------------------------

inline void save_scorer(ScorerModel& model, const nlohmann::json& extra,
                        const std::string& dir) {
  ensure_dir(dir);
  save_tensors(model.params(), dir + "/scorer.bin");
  nlohmann::json meta = {{"kind", "scorer"},
                         {"config", model.config.to_json()},
                         {"seed", model.config.seed}};
  for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
  write_json_file(meta, dir + "/scorer.json");
}

inline ScorerModel load_scorer(const std::string& dir, nlohmann::json* meta_out = nullptr) {
  nlohmann::json meta = read_json_file(dir + "/scorer.json");
  ScorerModel model;
  Rng rng(0);
  model.init(ScorerConfig::from_json(meta.at("config")), rng);
  load_tensors(model.params(), dir + "/scorer.bin");
  if (meta_out) *meta_out = meta;
  return model;
}

inline std::string scorer_hash(const std::string& dir) {
  return hash_file(dir + "/scorer.bin");
}

}  // namespace damagen::scorer
