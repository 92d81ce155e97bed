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
#include "damagen/eval.hpp"
#include "damagen/toyworld.hpp"

// Siamese damage classifier: one patch-transformer encoder applied to both
// images, features concatenated into a 2-layer MLP head with a single logit.
// Training covers the full two-stage protocol and its ablation variants
// R0..R4.

namespace damagen::classifier {

using nn::Mat;
using nn::Vec;
using toyworld::LabeledPair;

struct ArchConfig {
  int image_size = 64;
  int patch = 8;
  int width = 64;   // token width; also the pooled feature dimension d
  int blocks = 4;
  int heads = 4;
  int head_hidden = 64;

  int tokens_per_side() const { return image_size / patch; }
  int tokens() const { return tokens_per_side() * tokens_per_side(); }
  int patch_dim() const { return 3 * patch * patch; }

  void validate() const {
    config_check(image_size % patch == 0, "classifier: patch must divide image size");
    config_check(width % heads == 0, "classifier: width must divide heads");
  }

  nlohmann::json to_json() const {
    return {{"image_size", image_size}, {"patch", patch}, {"width", width},
            {"blocks", blocks}, {"heads", heads}, {"head_hidden", head_hidden}};
  }
  static ArchConfig from_json(const nlohmann::json& j) {
    ArchConfig c;
    c.image_size = j.value("image_size", c.image_size);
    c.patch = j.value("patch", c.patch);
    c.width = j.value("width", c.width);
    c.blocks = j.value("blocks", c.blocks);
    c.heads = j.value("heads", c.heads);
    c.head_hidden = j.value("head_hidden", c.head_hidden);
    return c;
  }
};

// Defaults follow the reference protocol; desk-scale presets override the
// learning rates and iteration budget through config files.
struct TrainConfig {
  double lr_backbone = 2e-6;
  double lr_head = 2e-5;
  int batch_size = 64;
  int max_iterations = 5000;
  int eval_every = 100;
  int patience = 10;  // evaluations without improvement before stopping
  std::uint64_t seed = 0;

  void validate() const {
    config_check(lr_backbone > 0 && lr_head > 0, "train config: learning rates must be positive");
    config_check(batch_size >= 1 && max_iterations >= 1, "train config: sizes must be positive");
    config_check(eval_every >= 1 && patience >= 1, "train config: eval cadence must be positive");
  }

  nlohmann::json to_json() const {
    return {{"lr_backbone", lr_backbone}, {"lr_head", lr_head},
            {"batch_size", batch_size}, {"max_iterations", max_iterations},
            {"eval_every", eval_every}, {"patience", patience}, {"seed", seed}};
  }
  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.lr_backbone = j.value("lr_backbone", c.lr_backbone);
    c.lr_head = j.value("lr_head", c.lr_head);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

struct ClassifierModel {
  ArchConfig arch;
  nn::Dense<float> patch_embed;
  nn::Embedding<float> pos_row, pos_col;
  std::vector<nn::TransformerBlock<float>> blocks;
  nn::LayerNorm<float> final_ln;
  nn::Dense<float> head_fc1;  // 2d -> hidden
  nn::Dense<float> head_fc2;  // hidden -> 1
  std::string stage = "init";

  void init(const ArchConfig& cfg, Rng& rng) {
    arch = cfg;
    arch.validate();
    patch_embed.init("patch_embed", cfg.width, cfg.patch_dim(), rng, nn::kBackbone);
    pos_row.init("c.pos_row", cfg.width, cfg.tokens_per_side(), rng, 0.02, nn::kBackbone);
    pos_col.init("c.pos_col", cfg.width, cfg.tokens_per_side(), rng, 0.02, nn::kBackbone);
    blocks.resize(static_cast<std::size_t>(cfg.blocks));
    for (int i = 0; i < cfg.blocks; ++i)
      blocks[static_cast<std::size_t>(i)].init("c.block" + std::to_string(i), cfg.width,
                                               cfg.heads, rng, nn::kBackbone);
    final_ln.init("c.final_ln", cfg.width, nn::kBackbone);
    head_fc1.init("head_fc1", cfg.head_hidden, 2 * cfg.width, rng, nn::kHead);
    head_fc2.init("head_fc2", 1, cfg.head_hidden, rng, nn::kHead);
  }

  nn::TensorList<float> params() {
    nn::TensorList<float> ps;
    for (auto* p : patch_embed.params()) ps.push_back(p);
    for (auto* p : pos_row.params()) ps.push_back(p);
    for (auto* p : pos_col.params()) ps.push_back(p);
    for (auto& b : blocks)
      for (auto* p : b.params()) ps.push_back(p);
    for (auto* p : final_ln.params()) ps.push_back(p);
    for (auto* p : head_fc1.params()) ps.push_back(p);
    for (auto* p : head_fc2.params()) ps.push_back(p);
    return ps;
  }

  nn::TensorList<float> encoder_params() {
    nn::TensorList<float> ps;
    for (auto* p : params())
      if (p->group == nn::kBackbone) ps.push_back(p);
    return ps;
  }
};

namespace detail {

inline Mat<float> extract_patches(const ArchConfig& arch, const Image& img) {
  contract_check(img.height == arch.image_size && img.width == arch.image_size,
                 "classifier: image size mismatch");
  const int p = arch.patch, side = arch.tokens_per_side();
  Mat<float> x(arch.patch_dim(), arch.tokens());
  for (int pr = 0; pr < side; ++pr) {
    for (int pc = 0; pc < side; ++pc) {
      const Eigen::Index col = static_cast<Eigen::Index>(pr) * side + pc;
      Eigen::Index row = 0;
      for (int ch = 0; ch < 3; ++ch)
        for (int py = 0; py < p; ++py)
          for (int px = 0; px < p; ++px)
            x(row++, col) =
                static_cast<float>(img.at(pr * p + py, pc * p + px, ch)) / 255.0f;
    }
  }
  return x;
}

struct EncoderCache {
  nn::DenseCache<float> embed_cache;
  std::vector<int> row_ids, col_ids;
  std::vector<nn::BlockCache<float>> block_caches;
  nn::LayerNormCache<float> ln_cache;
  Eigen::Index n_images = 0;
};

// Batched encoder over n images: returns (d, n) pooled features.
inline Mat<float> encode_batch(const ClassifierModel& m, const std::vector<const Image*>& imgs,
                               EncoderCache* cache) {
  const auto& arch = m.arch;
  const int tokens = arch.tokens(), side = arch.tokens_per_side();
  const auto n = static_cast<Eigen::Index>(imgs.size());
  Mat<float> x(arch.patch_dim(), n * tokens);
  for (Eigen::Index b = 0; b < n; ++b)
    x.middleCols(b * tokens, tokens) = extract_patches(arch, *imgs[static_cast<std::size_t>(b)]);

  Mat<float> h = m.patch_embed.forward(x, cache ? &cache->embed_cache : nullptr);
  std::vector<int> row_ids, col_ids;
  row_ids.reserve(static_cast<std::size_t>(n) * tokens);
  col_ids.reserve(row_ids.capacity());
  for (Eigen::Index b = 0; b < n; ++b)
    for (int t = 0; t < tokens; ++t) {
      row_ids.push_back(t / side);
      col_ids.push_back(t % side);
    }
  h += m.pos_row.gather(row_ids) + m.pos_col.gather(col_ids);
  if (cache) {
    cache->row_ids = std::move(row_ids);
    cache->col_ids = std::move(col_ids);
    cache->block_caches.resize(m.blocks.size());
    cache->n_images = n;
  }
  for (std::size_t i = 0; i < m.blocks.size(); ++i)
    h = m.blocks[i].forward(h, tokens, cache ? &cache->block_caches[i] : nullptr);
  h = m.final_ln.forward(h, cache ? &cache->ln_cache : nullptr);

  Mat<float> feats(arch.width, n);
  for (Eigen::Index b = 0; b < n; ++b)
    feats.col(b) = h.middleCols(b * tokens, tokens).rowwise().mean();
  return feats;
}

inline void encode_backward(ClassifierModel& m, const Mat<float>& dfeats,
                            EncoderCache& cache) {
  const int tokens = m.arch.tokens();
  const Eigen::Index n = cache.n_images;
  Mat<float> dh(m.arch.width, n * tokens);
  const float inv = 1.0f / static_cast<float>(tokens);
  for (Eigen::Index b = 0; b < n; ++b)
    dh.middleCols(b * tokens, tokens) = (dfeats.col(b) * inv).replicate(1, tokens);
  dh = m.final_ln.backward(dh, cache.ln_cache);
  for (std::size_t i = m.blocks.size(); i-- > 0;)
    dh = m.blocks[i].backward(dh, tokens, cache.block_caches[i]);
  m.pos_row.scatter_grad(cache.row_ids, dh);
  m.pos_col.scatter_grad(cache.col_ids, dh);
  m.patch_embed.backward(dh, cache.embed_cache);
}

struct HeadCache {
  nn::DenseCache<float> fc1_cache;
  nn::GeluCache<float> gelu_cache;
  nn::DenseCache<float> fc2_cache;
};

inline Mat<float> head_forward(const ClassifierModel& m, const Mat<float>& paired,
                               HeadCache* cache) {
  Mat<float> h = m.head_fc1.forward(paired, cache ? &cache->fc1_cache : nullptr);
  h = nn::gelu(h, cache ? &cache->gelu_cache : nullptr);
  return m.head_fc2.forward(h, cache ? &cache->fc2_cache : nullptr);
}

inline Mat<float> head_backward(ClassifierModel& m, const Mat<float>& dlogits,
                                HeadCache& cache) {
  Mat<float> dh = m.head_fc2.backward(dlogits, cache.fc2_cache);
  dh = nn::gelu_backward(dh, cache.gelu_cache);
  return m.head_fc1.backward(dh, cache.fc1_cache);
}

// Features of the pre images stacked over the post features: (2d, B).
inline Mat<float> pair_features(const Mat<float>& feats, Eigen::Index batch) {
  const Eigen::Index d = feats.rows();
  Mat<float> paired(2 * d, batch);
  paired.topRows(d) = feats.leftCols(batch);
  paired.bottomRows(d) = feats.rightCols(batch);
  return paired;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

inline Vec<float> encode_image(const ClassifierModel& model, const Image& img) {
  return detail::encode_batch(model, {&img}, nullptr).col(0);
}

// Shared-encoder forward: logit = head(concat(enc(pre), enc(post))).
inline double forward(const ClassifierModel& model, const Image& pre, const Image& post) {
  Mat<float> feats = detail::encode_batch(model, {&pre, &post}, nullptr);
  Mat<float> paired(2 * model.arch.width, 1);
  paired.topRows(model.arch.width) = feats.col(0);
  paired.bottomRows(model.arch.width) = feats.col(1);
  return static_cast<double>(detail::head_forward(model, paired, nullptr)(0, 0));
}

inline double bce_loss(double logit, int label) {
  return nn::bce_with_logit<double>(logit, label);
}

struct Prediction {
  double probability = 0.0;
  int decision = 0;  // damage only when probability > 0.5, strictly
};

inline Prediction predict(const ClassifierModel& model, const Image& pre, const Image& post) {
  const double logit = forward(model, pre, post);
  Prediction p;
  p.probability = 1.0 / (1.0 + std::exp(-logit));
  p.decision = p.probability > 0.5 ? 1 : 0;
  return p;
}

// Probabilities over a dataset in order; batched for throughput.
inline std::vector<double> predict_probs(const ClassifierModel& model,
                                         const std::vector<LabeledPair>& pairs,
                                         int batch_size = 64) {
  std::vector<double> probs(pairs.size());
  for (std::size_t at = 0; at < pairs.size(); at += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min<std::size_t>(batch_size, pairs.size() - at);
    std::vector<const Image*> imgs;
    imgs.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) imgs.push_back(&pairs[at + i].pre);
    for (std::size_t i = 0; i < n; ++i) imgs.push_back(&pairs[at + i].post);
    Mat<float> feats = detail::encode_batch(model, imgs, nullptr);
    Mat<float> paired = detail::pair_features(feats, static_cast<Eigen::Index>(n));
    Mat<float> logits = detail::head_forward(model, paired, nullptr);
    for (std::size_t i = 0; i < n; ++i)
      probs[at + i] = 1.0 / (1.0 + std::exp(-static_cast<double>(
                                 logits(0, static_cast<Eigen::Index>(i)))));
  }
  return probs;
}

inline double val_auprc(const ClassifierModel& model, const std::vector<LabeledPair>& val) {
  std::vector<double> scores = predict_probs(model, val);
  std::vector<int> labels(val.size());
  for (std::size_t i = 0; i < val.size(); ++i) labels[i] = val[i].label;
  return eval::auprc(scores, labels);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainResult {
  std::vector<std::pair<int, double>> val_history;  // (iteration, val AUPRC)
  int best_iteration = 0;
  double best_val_auprc = 0.0;
  int iterations_run = 0;
};

namespace detail {

struct Snapshot {
  std::vector<Mat<float>> values;
  void capture(const nn::TensorList<float>& params) {
    values.clear();
    values.reserve(params.size());
    for (auto* p : params) values.push_back(p->value);
  }
  void restore(const nn::TensorList<float>& params) const {
    contract_check(values.size() == params.size(), "snapshot: parameter list changed");
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
  }
};

// Core loop shared by all end-to-end variants: uniform batch sampling with
// replacement, per-group learning rates, early stopping on validation AUPRC.
inline TrainResult train_end_to_end(ClassifierModel& model,
                                    const std::vector<const LabeledPair*>& train,
                                    const std::vector<LabeledPair>& val,
                                    const TrainConfig& cfg,
                                    const std::vector<std::pair<int, double>>& lr_groups) {
  config_check(!train.empty(), "classifier training: empty dataset");
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "classifier-train"));
  nn::Adam<float> adam(nn::AdamConfig<float>{0.9, 0.999, 1e-8, 1.0});
  auto params = model.params();

  TrainResult result;
  Snapshot best;
  best.capture(params);
  int evals_since_best = 0;

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    nn::zero_grads(params);
    const auto bsz = static_cast<Eigen::Index>(cfg.batch_size);
    std::vector<const Image*> imgs;
    imgs.reserve(static_cast<std::size_t>(2 * bsz));
    std::vector<int> labels(static_cast<std::size_t>(bsz));
    std::vector<const LabeledPair*> chosen(static_cast<std::size_t>(bsz));
    for (Eigen::Index b = 0; b < bsz; ++b) {
      const auto idx = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(train.size()) - 1));
      chosen[static_cast<std::size_t>(b)] = train[idx];
      labels[static_cast<std::size_t>(b)] = train[idx]->label;
    }
    for (Eigen::Index b = 0; b < bsz; ++b) imgs.push_back(&chosen[static_cast<std::size_t>(b)]->pre);
    for (Eigen::Index b = 0; b < bsz; ++b) imgs.push_back(&chosen[static_cast<std::size_t>(b)]->post);

    EncoderCache enc_cache;
    Mat<float> feats = encode_batch(model, imgs, &enc_cache);
    Mat<float> paired = pair_features(feats, bsz);
    HeadCache head_cache;
    Mat<float> logits = head_forward(model, paired, &head_cache);

    double loss = 0.0;
    Mat<float> dlogits(1, bsz);
    for (Eigen::Index b = 0; b < bsz; ++b) {
      const float z = logits(0, b);
      const int y = labels[static_cast<std::size_t>(b)];
      loss += nn::bce_with_logit<double>(z, y);
      dlogits(0, b) = nn::bce_with_logit_grad<float>(z, y) / static_cast<float>(bsz);
    }
    loss /= static_cast<double>(bsz);
    nn::check_finite(loss, "classifier training");

    Mat<float> dpaired = head_backward(model, dlogits, head_cache);
    Mat<float> dfeats(model.arch.width, 2 * bsz);
    dfeats.leftCols(bsz) = dpaired.topRows(model.arch.width);
    dfeats.rightCols(bsz) = dpaired.bottomRows(model.arch.width);
    encode_backward(model, dfeats, enc_cache);
    adam.step(params, lr_groups);
    result.iterations_run = iter;

    if (iter % cfg.eval_every == 0 || iter == cfg.max_iterations) {
      const double score = val_auprc(model, val);
      result.val_history.emplace_back(iter, score);
      if (result.val_history.size() == 1 || score > result.best_val_auprc) {
        result.best_val_auprc = score;
        result.best_iteration = iter;
        best.capture(params);
        evals_since_best = 0;
      } else if (++evals_since_best >= cfg.patience) {
        break;
      }
    }
  }
  best.restore(params);
  return result;
}

}  // namespace detail

// Stage 1: end-to-end training on labeled source data with per-group
// learning rates; early stopping keeps the best validation-AUPRC checkpoint.
inline TrainResult train_stage1(ClassifierModel& model, const ArchConfig& arch,
                                const std::vector<LabeledPair>& source_train,
                                const std::vector<LabeledPair>& val,
                                const TrainConfig& cfg) {
  config_check(!source_train.empty(), "train_stage1: empty source data");
  Rng init_rng(derive_seed(cfg.seed, "classifier-init"));
  model.init(arch, init_rng);
  std::vector<const LabeledPair*> ptrs;
  ptrs.reserve(source_train.size());
  for (const auto& p : source_train) ptrs.push_back(&p);
  TrainResult r = detail::train_end_to_end(
      model, ptrs, val, cfg, {{nn::kBackbone, cfg.lr_backbone}, {nn::kHead, cfg.lr_head}});
  model.stage = "R0";
  return r;
}

// Stage 2: last-layer fine-tuning on synthetic target pairs. Encoder features
// are cached once (the encoder is frozen), so only the MLP head trains.
inline TrainResult train_stage2_lastlayer(ClassifierModel& model,
                                          const std::vector<LabeledPair>& synthetic_train,
                                          const std::vector<LabeledPair>& target_val,
                                          const TrainConfig& cfg) {
  config_check(!synthetic_train.empty(), "train_stage2: empty synthetic data");
  cfg.validate();

  auto cache_features = [&](const std::vector<LabeledPair>& pairs) {
    Mat<float> feats(2 * model.arch.width, static_cast<Eigen::Index>(pairs.size()));
    constexpr std::size_t kChunk = 64;
    for (std::size_t at = 0; at < pairs.size(); at += kChunk) {
      const std::size_t n = std::min(kChunk, pairs.size() - at);
      std::vector<const Image*> imgs;
      imgs.reserve(2 * n);
      for (std::size_t i = 0; i < n; ++i) imgs.push_back(&pairs[at + i].pre);
      for (std::size_t i = 0; i < n; ++i) imgs.push_back(&pairs[at + i].post);
      Mat<float> f = detail::encode_batch(model, imgs, nullptr);
      feats.middleCols(static_cast<Eigen::Index>(at), static_cast<Eigen::Index>(n)) =
          detail::pair_features(f, static_cast<Eigen::Index>(n));
    }
    return feats;
  };
  Mat<float> train_feats = cache_features(synthetic_train);
  Mat<float> val_feats = cache_features(target_val);
  std::vector<int> train_labels(synthetic_train.size());
  for (std::size_t i = 0; i < synthetic_train.size(); ++i)
    train_labels[i] = synthetic_train[i].label;
  std::vector<int> val_labels(target_val.size());
  for (std::size_t i = 0; i < target_val.size(); ++i) val_labels[i] = target_val[i].label;

  Rng rng(derive_seed(cfg.seed, "classifier-stage2"));
  nn::Adam<float> adam(nn::AdamConfig<float>{0.9, 0.999, 1e-8, 1.0});
  nn::TensorList<float> head_params;
  for (auto* p : model.params())
    if (p->group == nn::kHead) head_params.push_back(p);

  auto head_val_auprc = [&]() {
    Mat<float> logits = detail::head_forward(model, val_feats, nullptr);
    std::vector<double> scores(val_labels.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
      scores[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(
                             logits(0, static_cast<Eigen::Index>(i)))));
    return eval::auprc(scores, val_labels);
  };

  TrainResult result;
  detail::Snapshot best;
  best.capture(head_params);
  int evals_since_best = 0;
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    nn::zero_grads(head_params);
    const auto bsz = static_cast<Eigen::Index>(cfg.batch_size);
    Mat<float> batch_feats(train_feats.rows(), bsz);
    std::vector<int> labels(static_cast<std::size_t>(bsz));
    for (Eigen::Index b = 0; b < bsz; ++b) {
      const auto idx = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(synthetic_train.size()) - 1));
      batch_feats.col(b) = train_feats.col(static_cast<Eigen::Index>(idx));
      labels[static_cast<std::size_t>(b)] = train_labels[idx];
    }
    detail::HeadCache head_cache;
    Mat<float> logits = detail::head_forward(model, batch_feats, &head_cache);
    double loss = 0.0;
    Mat<float> dlogits(1, bsz);
    for (Eigen::Index b = 0; b < bsz; ++b) {
      loss += nn::bce_with_logit<double>(logits(0, b), labels[static_cast<std::size_t>(b)]);
      dlogits(0, b) = nn::bce_with_logit_grad<float>(logits(0, b),
                                                     labels[static_cast<std::size_t>(b)]) /
                      static_cast<float>(bsz);
    }
    loss /= static_cast<double>(bsz);
    nn::check_finite(loss, "classifier stage 2");
    detail::head_backward(model, dlogits, head_cache);
    adam.step(head_params, {{nn::kHead, cfg.lr_head}});
    result.iterations_run = iter;

    if (iter % cfg.eval_every == 0 || iter == cfg.max_iterations) {
      const double score = head_val_auprc();
      result.val_history.emplace_back(iter, score);
      if (result.val_history.size() == 1 || score > result.best_val_auprc) {
        result.best_val_auprc = score;
        result.best_iteration = iter;
        best.capture(head_params);
        evals_since_best = 0;
      } else if (++evals_since_best >= cfg.patience) {
        break;
      }
    }
  }
  best.restore(head_params);
  model.stage = "R4";
  return result;
}

// End-to-end fine-tuning from an already trained model (variant R3).
inline TrainResult finetune_end_to_end(ClassifierModel& model,
                                       const std::vector<LabeledPair>& train,
                                       const std::vector<LabeledPair>& val,
                                       const TrainConfig& cfg) {
  config_check(!train.empty(), "finetune: empty dataset");
  std::vector<const LabeledPair*> ptrs;
  ptrs.reserve(train.size());
  for (const auto& p : train) ptrs.push_back(&p);
  TrainResult r = detail::train_end_to_end(
      model, ptrs, val, cfg, {{nn::kBackbone, cfg.lr_backbone}, {nn::kHead, cfg.lr_head}});
  model.stage = "R3";
  return r;
}

// Joint pool for R2: uniform sampling over the concatenation, so the expected
// real-to-synthetic batch ratio equals the dataset-size ratio.
inline TrainResult train_joint(ClassifierModel& model, const ArchConfig& arch,
                               const std::vector<LabeledPair>& real,
                               const std::vector<LabeledPair>& synthetic,
                               const std::vector<LabeledPair>& val, const TrainConfig& cfg) {
  config_check(!real.empty() && !synthetic.empty(), "train_joint: both datasets required");
  Rng init_rng(derive_seed(cfg.seed, "classifier-init"));
  model.init(arch, init_rng);
  std::vector<const LabeledPair*> ptrs;
  ptrs.reserve(real.size() + synthetic.size());
  for (const auto& p : real) ptrs.push_back(&p);
  for (const auto& p : synthetic) ptrs.push_back(&p);
  TrainResult r = detail::train_end_to_end(
      model, ptrs, val, cfg, {{nn::kBackbone, cfg.lr_backbone}, {nn::kHead, cfg.lr_head}});
  model.stage = "R2";
  return r;
}

struct VariantConfig {
  ArchConfig arch;
  TrainConfig stage1;
  TrainConfig stage2;
};

// Dispatch for the ablation variants (R0 source-only, R1 synthetic-only,
// R2 joint, R3 end-to-end fine-tune, R4 last-layer fine-tune).
inline TrainResult train_variant(const std::string& variant, ClassifierModel& model,
                                 const std::vector<LabeledPair>& real_source,
                                 const std::vector<LabeledPair>& synthetic_target,
                                 const std::vector<LabeledPair>& val,
                                 const VariantConfig& cfg) {
  if (variant == "R0") {
    config_check(!real_source.empty(), "R0 requires real source data");
    TrainResult r = train_stage1(model, cfg.arch, real_source, val, cfg.stage1);
    model.stage = "R0";
    return r;
  }
  if (variant == "R1") {
    config_check(!synthetic_target.empty(), "R1 requires synthetic data");
    TrainResult r = train_stage1(model, cfg.arch, synthetic_target, val, cfg.stage1);
    model.stage = "R1";
    return r;
  }
  if (variant == "R2") {
    TrainResult r = train_joint(model, cfg.arch, real_source, synthetic_target, val, cfg.stage1);
    model.stage = "R2";
    return r;
  }
  if (variant == "R3") {
    config_check(!real_source.empty() && !synthetic_target.empty(),
                 "R3 requires real and synthetic data");
    train_stage1(model, cfg.arch, real_source, val, cfg.stage1);
    TrainResult r = finetune_end_to_end(model, synthetic_target, val, cfg.stage2);
    model.stage = "R3";
    return r;
  }
  if (variant == "R4") {
    config_check(!real_source.empty() && !synthetic_target.empty(),
                 "R4 requires real and synthetic data");
    train_stage1(model, cfg.arch, real_source, val, cfg.stage1);
    TrainResult r = train_stage2_lastlayer(model, synthetic_target, val, cfg.stage2);
    return r;
  }
  throw ConfigError("unknown training variant: " + variant);
}

// ---------------------------------------------------------------------------
// Checkpoint IO
// ---------------------------------------------------------------------------

inline void save_classifier(ClassifierModel& model, const TrainResult& result,
                            const nlohmann::json& extra, const std::string& dir) {
  ensure_dir(dir);
  save_tensors(model.params(), dir + "/classifier.bin");
  nlohmann::json history = nlohmann::json::array();
  for (const auto& [iter, score] : result.val_history)
    history.push_back({{"iteration", iter}, {"val_auprc", score}});
  nlohmann::json meta = {{"kind", "classifier"},
                         {"stage", model.stage},
                         {"arch", model.arch.to_json()},
                         {"val_history", history},
                         {"best_iteration", result.best_iteration},
                         {"best_val_auprc", result.best_val_auprc},
                         {"iterations_run", result.iterations_run}};
  for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
  write_json_file(meta, dir + "/classifier.json");
}

inline ClassifierModel load_classifier(const std::string& dir,
                                       nlohmann::json* meta_out = nullptr) {
  nlohmann::json meta = read_json_file(dir + "/classifier.json");
  ClassifierModel model;
  Rng rng(0);
  model.init(ArchConfig::from_json(meta.at("arch")), rng);
  load_tensors(model.params(), dir + "/classifier.bin");
  model.stage = meta.value("stage", "init");
  if (meta_out) *meta_out = meta;
  return model;
}

}  // namespace damagen::classifier
