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
#include "damagen/core/nn.hpp"
#include "damagen/core/rng.hpp"
#include "damagen/core/serialize.hpp"
#include "damagen/prompts.hpp"
#include "damagen/vqcodec.hpp"

// Text-conditioned masked-token transformer. Prompt word embeddings are
// prepended as context positions under full self-attention; generation fills
// masked grid positions by iterative parallel decoding on a cosine schedule.

namespace damagen::maskgen {

using nn::Mat;
using nn::Vec;
using vqcodec::TokenGrid;

struct GeneratorConfig {
  int codebook_size = 128;
  int grid_rows = 8;
  int grid_cols = 8;
  int width = 128;
  int blocks = 4;
  int heads = 4;
  int prompt_len = prompts::kSeqLen;
  int vocab_words = 0;  // word types; the table adds UNK and PAD slots
  int adapter_rank = 8;
  int steps = 2500;
  int batch_size = 32;
  double lr = 3e-4;
  double mask_r_min = 0.3;
  double mask_r_max = 1.0;
  std::uint64_t seed = 0;

  int cells() const { return grid_rows * grid_cols; }
  int seq_len() const { return prompt_len + cells(); }
  int mask_id() const { return codebook_size; }

  void validate() const {
    config_check(codebook_size >= 2 && grid_rows > 0 && grid_cols > 0,
                 "generator: bad grid/codebook");
    config_check(width > 0 && heads > 0 && width % heads == 0,
                 "generator: width must divide heads");
    config_check(vocab_words > 0, "generator: vocabulary not set");
    config_check(mask_r_min > 0.0 && mask_r_min <= mask_r_max && mask_r_max <= 1.0,
                 "generator: mask fraction range invalid");
  }

  nlohmann::json to_json() const {
    return {{"codebook_size", codebook_size}, {"grid_rows", grid_rows},
            {"grid_cols", grid_cols}, {"width", width}, {"blocks", blocks},
            {"heads", heads}, {"prompt_len", prompt_len}, {"vocab_words", vocab_words},
            {"adapter_rank", adapter_rank}, {"steps", steps},
            {"batch_size", batch_size}, {"lr", lr}, {"mask_r_min", mask_r_min},
            {"mask_r_max", mask_r_max}, {"seed", seed}};
  }
  static GeneratorConfig from_json(const nlohmann::json& j) {
    GeneratorConfig c;
    c.codebook_size = j.value("codebook_size", c.codebook_size);
    c.grid_rows = j.value("grid_rows", c.grid_rows);
    c.grid_cols = j.value("grid_cols", c.grid_cols);
    c.width = j.value("width", c.width);
    c.blocks = j.value("blocks", c.blocks);
    c.heads = j.value("heads", c.heads);
    c.prompt_len = j.value("prompt_len", c.prompt_len);
    c.vocab_words = j.value("vocab_words", c.vocab_words);
    c.adapter_rank = j.value("adapter_rank", c.adapter_rank);
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.mask_r_min = j.value("mask_r_min", c.mask_r_min);
    c.mask_r_max = j.value("mask_r_max", c.mask_r_max);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

// Cosine-decay unmasking: mask_ratio(t) = cos(pi * t / (2T)). Because the
// ceiling can stall, at least one position is unmasked per step; the final
// step always clears the rest.
struct DecodeSchedule {
  int total_steps = 6;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    config_check(total_steps >= 1, "decode schedule: total_steps must be >= 1");
    config_check(temperature >= 0.0, "decode schedule: temperature must be >= 0");
  }

  double mask_ratio(int t) const {
    return std::cos(3.14159265358979323846 * t / (2.0 * total_steps));
  }

  // Remaining-masked count after step t, given the previous remaining count.
  int remaining_after(int t, int initial_masked, int prev_remaining) const {
    if (t >= total_steps) return 0;
    const int raw = static_cast<int>(std::ceil(mask_ratio(t) * initial_masked));
    return std::clamp(raw, 0, std::max(prev_remaining - 1, 0));
  }
};

struct GeneratorModel {
  GeneratorConfig config;
  nn::Embedding<float> token_emb;   // codebook ids + MASK
  nn::Embedding<float> prompt_emb;  // UNK + words + PAD
  nn::Embedding<float> pos_row, pos_col, prompt_pos;
  std::vector<nn::TransformerBlock<float>> blocks;
  nn::LayerNorm<float> final_ln;
  nn::Dense<float> head;  // width -> K; the MASK id is never predicted
  bool has_adapters = false;
  std::string vocab_hash;
  std::string codec_hash;

  void init(const GeneratorConfig& cfg, Rng& rng) {
    config = cfg;
    config.validate();
    token_emb.init("token_emb", cfg.width, cfg.codebook_size + 1, rng);
    prompt_emb.init("prompt_emb", cfg.width, cfg.vocab_words + 2, rng);
    pos_row.init("pos_row", cfg.width, cfg.grid_rows, rng);
    pos_col.init("pos_col", cfg.width, cfg.grid_cols, rng);
    prompt_pos.init("prompt_pos", cfg.width, cfg.prompt_len, rng);
    blocks.resize(static_cast<std::size_t>(cfg.blocks));
    for (int i = 0; i < cfg.blocks; ++i)
      blocks[static_cast<std::size_t>(i)].init("block" + std::to_string(i), cfg.width,
                                               cfg.heads, rng);
    final_ln.init("final_ln", cfg.width);
    head.init("head", cfg.codebook_size, cfg.width, rng);
  }

  void add_adapters(Rng& rng) {
    contract_check(!has_adapters, "adapters already present");
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].add_adapter("block" + std::to_string(i), config.adapter_rank, rng);
    has_adapters = true;
  }

  nn::TensorList<float> params(bool include_adapters = true) {
    nn::TensorList<float> ps;
    for (auto* p : token_emb.params()) ps.push_back(p);
    for (auto* p : prompt_emb.params()) ps.push_back(p);
    for (auto* p : pos_row.params()) ps.push_back(p);
    for (auto* p : pos_col.params()) ps.push_back(p);
    for (auto* p : prompt_pos.params()) ps.push_back(p);
    for (auto& b : blocks)
      for (auto* p : b.params(include_adapters)) ps.push_back(p);
    for (auto* p : final_ln.params()) ps.push_back(p);
    for (auto* p : head.params()) ps.push_back(p);
    return ps;
  }

  nn::TensorList<float> base_params() { return params(false); }
  nn::TensorList<float> adapter_params() {
    nn::TensorList<float> ps;
    for (auto& b : blocks)
      if (b.has_adapter)
        for (auto* p : b.adapter.params()) ps.push_back(p);
    return ps;
  }
};

namespace detail {

struct ForwardCache {
  std::vector<int> prompt_ids;  // concatenated, batch-major
  std::vector<int> token_ids;
  std::vector<int> row_ids, col_ids, ppos_ids;
  std::vector<nn::BlockCache<float>> block_caches;
  nn::LayerNormCache<float> ln_cache;
  nn::DenseCache<float> head_cache;
  Eigen::Index batch = 0;
};

// Logits over the K codebook classes at every grid cell: (K, batch * cells).
inline Mat<float> forward_batch(const GeneratorModel& m,
                                const std::vector<const TokenGrid*>& grids,
                                const std::vector<const std::vector<int>*>& prompts,
                                ForwardCache* cache) {
  const auto& cfg = m.config;
  const auto batch = static_cast<Eigen::Index>(grids.size());
  contract_check(batch > 0 && grids.size() == prompts.size(),
                 "generator forward: empty or ragged batch");
  const int L = cfg.prompt_len, cells = cfg.cells(), seq = cfg.seq_len();

  std::vector<int> prompt_ids, token_ids, row_ids, col_ids, ppos_ids;
  prompt_ids.reserve(static_cast<std::size_t>(batch) * L);
  token_ids.reserve(static_cast<std::size_t>(batch) * cells);
  row_ids.reserve(token_ids.capacity());
  col_ids.reserve(token_ids.capacity());
  ppos_ids.reserve(prompt_ids.capacity());
  for (Eigen::Index b = 0; b < batch; ++b) {
    const TokenGrid& g = *grids[static_cast<std::size_t>(b)];
    contract_check(g.rows == cfg.grid_rows && g.cols == cfg.grid_cols,
                   "generator forward: grid shape mismatch");
    const std::vector<int>& p = *prompts[static_cast<std::size_t>(b)];
    contract_check(static_cast<int>(p.size()) == L,
                   "generator forward: prompt length mismatch");
    for (int i = 0; i < L; ++i) {
      prompt_ids.push_back(p[static_cast<std::size_t>(i)]);
      ppos_ids.push_back(i);
    }
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) {
        const int id = g.at(r, c);
        contract_check(id >= 0 && id <= cfg.mask_id(),
                       "generator forward: token id out of range");
        token_ids.push_back(id);
        row_ids.push_back(r);
        col_ids.push_back(c);
      }
    }
  }

  Mat<float> prompt_x = m.prompt_emb.gather(prompt_ids) + m.prompt_pos.gather(ppos_ids);
  Mat<float> token_x = m.token_emb.gather(token_ids) + m.pos_row.gather(row_ids) +
                       m.pos_col.gather(col_ids);

  Mat<float> x(cfg.width, batch * seq);
  for (Eigen::Index b = 0; b < batch; ++b) {
    x.middleCols(b * seq, L) = prompt_x.middleCols(b * L, L);
    x.middleCols(b * seq + L, cells) = token_x.middleCols(b * cells, cells);
  }

  if (cache) {
    cache->prompt_ids = std::move(prompt_ids);
    cache->token_ids = std::move(token_ids);
    cache->row_ids = std::move(row_ids);
    cache->col_ids = std::move(col_ids);
    cache->ppos_ids = std::move(ppos_ids);
    cache->block_caches.resize(m.blocks.size());
    cache->batch = batch;
  }
  for (std::size_t i = 0; i < m.blocks.size(); ++i)
    x = m.blocks[i].forward(x, seq, cache ? &cache->block_caches[i] : nullptr);
  x = m.final_ln.forward(x, cache ? &cache->ln_cache : nullptr);

  Mat<float> img_cols(cfg.width, batch * cells);
  for (Eigen::Index b = 0; b < batch; ++b)
    img_cols.middleCols(b * cells, cells) = x.middleCols(b * seq + L, cells);
  return m.head.forward(img_cols, cache ? &cache->head_cache : nullptr);
}

inline void backward_batch(GeneratorModel& m, const Mat<float>& dlogits,
                           ForwardCache& cache) {
  const auto& cfg = m.config;
  const int L = cfg.prompt_len, cells = cfg.cells(), seq = cfg.seq_len();
  const Eigen::Index batch = cache.batch;

  Mat<float> dimg = m.head.backward(dlogits, cache.head_cache);
  Mat<float> dx = Mat<float>::Zero(cfg.width, batch * seq);
  for (Eigen::Index b = 0; b < batch; ++b)
    dx.middleCols(b * seq + L, cells) = dimg.middleCols(b * cells, cells);
  dx = m.final_ln.backward(dx, cache.ln_cache);
  for (std::size_t i = m.blocks.size(); i-- > 0;)
    dx = m.blocks[i].backward(dx, seq, cache.block_caches[i]);

  Mat<float> dprompt(cfg.width, batch * L);
  Mat<float> dtoken(cfg.width, batch * cells);
  for (Eigen::Index b = 0; b < batch; ++b) {
    dprompt.middleCols(b * L, L) = dx.middleCols(b * seq, L);
    dtoken.middleCols(b * cells, cells) = dx.middleCols(b * seq + L, cells);
  }
  m.prompt_emb.scatter_grad(cache.prompt_ids, dprompt);
  m.prompt_pos.scatter_grad(cache.ppos_ids, dprompt);
  m.token_emb.scatter_grad(cache.token_ids, dtoken);
  m.pos_row.scatter_grad(cache.row_ids, dtoken);
  m.pos_col.scatter_grad(cache.col_ids, dtoken);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Per-cell class logits as a (cells x K) matrix, cells in row-major order.
inline Mat<float> predict_tokens(const GeneratorModel& model, const TokenGrid& masked,
                                 const std::vector<int>& prompt_ids) {
  Mat<float> logits =
      detail::forward_batch(model, {&masked}, {&prompt_ids}, nullptr);
  return logits.transpose();
}

// Iterative parallel decoding. Positions unmasked on entry are never altered;
// each step commits the highest-confidence sampled tokens (ties by lowest
// flat index) until the schedule empties the mask.
inline TokenGrid parallel_decode(const GeneratorModel& model, const TokenGrid& masked,
                                 const std::vector<int>& prompt_ids,
                                 const DecodeSchedule& schedule) {
  schedule.validate();
  const int mask_id = model.config.mask_id();
  TokenGrid current = masked;
  std::vector<int> still_masked;
  for (std::size_t i = 0; i < current.ids.size(); ++i)
    if (current.ids[i] == mask_id) still_masked.push_back(static_cast<int>(i));
  const int initial_masked = static_cast<int>(still_masked.size());
  if (initial_masked == 0) return current;

  Rng rng(derive_seed(schedule.seed, "parallel-decode"));
  for (int t = 1; t <= schedule.total_steps && !still_masked.empty(); ++t) {
    Mat<float> logits =
        detail::forward_batch(model, {&current}, {&prompt_ids}, nullptr);  // (K, cells)
    struct Draw {
      int position;
      int token;
      float confidence;
    };
    std::vector<Draw> draws;
    draws.reserve(still_masked.size());
    for (int pos : still_masked) {
      Vec<float> col = logits.col(pos);
      int token;
      if (schedule.temperature <= 0.0) {
        Eigen::Index arg;
        col.maxCoeff(&arg);
        token = static_cast<int>(arg);
      } else {
        Vec<float> probs = nn::softmax_vec<float>(
            (col / static_cast<float>(schedule.temperature)).eval());
        const double u = rng.uniform01();
        double acc = 0.0;
        token = static_cast<int>(probs.size()) - 1;
        for (Eigen::Index k = 0; k < probs.size(); ++k) {
          acc += probs(k);
          if (u < acc) {
            token = static_cast<int>(k);
            break;
          }
        }
      }
      const Vec<float> natural = nn::softmax_vec<float>(col);
      draws.push_back({pos, token, natural(token)});
    }
    const int prev_remaining = static_cast<int>(still_masked.size());
    const int next_remaining = schedule.remaining_after(t, initial_masked, prev_remaining);
    const int commit = prev_remaining - next_remaining;
    // highest confidence first; ties keep the lower flat index
    std::stable_sort(draws.begin(), draws.end(), [](const Draw& a, const Draw& b) {
      return a.confidence > b.confidence;
    });
    for (int i = 0; i < commit; ++i)
      current.ids[static_cast<std::size_t>(draws[static_cast<std::size_t>(i)].position)] =
          draws[static_cast<std::size_t>(i)].token;
    still_masked.clear();
    for (std::size_t i = 0; i < current.ids.size(); ++i)
      if (current.ids[i] == mask_id) still_masked.push_back(static_cast<int>(i));
  }
  contract_check(still_masked.empty(), "parallel_decode: schedule left masked positions");
  return current;
}

struct TrainExample {
  TokenGrid tokens;              // complete grid of a reference post image
  std::vector<int> prompt_ids;   // tokenized prompt
};

struct GeneratorTrainResult {
  std::vector<double> loss_curve;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

namespace detail {

// One masked-token modeling step over a batch of examples.
inline double masked_step(GeneratorModel& model, const std::vector<TrainExample>& data,
                          const std::vector<std::size_t>& batch_idx, Rng& rng,
                          bool compute_grads) {
  const auto& cfg = model.config;
  const int cells = cfg.cells();
  std::vector<TokenGrid> inputs(batch_idx.size());
  std::vector<int> targets(batch_idx.size() * static_cast<std::size_t>(cells), -1);
  std::vector<const TokenGrid*> grid_ptrs(batch_idx.size());
  std::vector<const std::vector<int>*> prompt_ptrs(batch_idx.size());
  for (std::size_t b = 0; b < batch_idx.size(); ++b) {
    const TrainExample& ex = data[batch_idx[b]];
    inputs[b] = ex.tokens;
    const double r = rng.uniform_real(cfg.mask_r_min, cfg.mask_r_max);
    const int m = std::min(cells, static_cast<int>(std::ceil(r * cells)));
    // random subset of size m: prefix of a Fisher-Yates permutation
    std::vector<int> order(static_cast<std::size_t>(cells));
    for (int i = 0; i < cells; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < m; ++i) {
      const int j = static_cast<int>(rng.uniform_int(i, cells - 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      const int pos = order[static_cast<std::size_t>(i)];
      targets[b * static_cast<std::size_t>(cells) + static_cast<std::size_t>(pos)] =
          ex.tokens.ids[static_cast<std::size_t>(pos)];
      inputs[b].ids[static_cast<std::size_t>(pos)] = cfg.mask_id();
    }
    grid_ptrs[b] = &inputs[b];
    prompt_ptrs[b] = &ex.prompt_ids;
  }
  ForwardCache cache;
  Mat<float> logits =
      forward_batch(model, grid_ptrs, prompt_ptrs, compute_grads ? &cache : nullptr);
  Mat<float> dlogits;
  const double loss = nn::softmax_xent<float>(logits, targets,
                                              compute_grads ? &dlogits : nullptr);
  if (compute_grads) backward_batch(model, dlogits, cache);
  return loss;
}

}  // namespace detail

// Masked-token modeling on (post image tokens, prompt) pairs: a uniform
// random fraction of positions is masked and the true ids are predicted
// under cross-entropy.
inline GeneratorTrainResult train_generator(GeneratorModel& model,
                                            const std::vector<TrainExample>& data,
                                            const GeneratorConfig& cfg) {
  config_check(!data.empty(), "train_generator: empty dataset");
  Rng init_rng(derive_seed(cfg.seed, "generator-init"));
  model.init(cfg, init_rng);
  Rng rng(derive_seed(cfg.seed, "generator-train"));
  nn::Adam<float> adam(nn::AdamConfig<float>{0.9, 0.999, 1e-8, 1.0});
  auto params = model.params();
  GeneratorTrainResult result;
  for (int step = 0; step < cfg.steps; ++step) {
    nn::zero_grads(params);
    std::vector<std::size_t> batch(static_cast<std::size_t>(cfg.batch_size));
    for (auto& idx : batch)
      idx = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1));
    const double loss = detail::masked_step(model, data, batch, rng, true);
    nn::check_finite(loss, "train_generator");
    if (step == 0) result.initial_loss = loss;
    if (step % 10 == 0 || step == cfg.steps - 1) result.loss_curve.push_back(loss);
    result.final_loss = loss;
    adam.step(params, {{nn::kBackbone, cfg.lr}});
  }
  return result;
}

struct AdapterConfig {
  int steps = 400;
  int batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"steps", steps}, {"batch_size", batch_size}, {"lr", lr}, {"seed", seed}};
  }
};

// Adapter fine-tuning on (target pre-image, undamaged prompt) pairs. Only the
// bottleneck adapters train; every base tensor stays byte-identical.
inline GeneratorTrainResult finetune_adapters(GeneratorModel& model,
                                              const std::vector<TrainExample>& data,
                                              const AdapterConfig& cfg) {
  config_check(!data.empty(), "finetune_adapters: empty dataset");
  contract_check(!model.has_adapters, "finetune_adapters: model already fine-tuned");
  Rng adapter_rng(derive_seed(cfg.seed, "adapter-init"));
  model.add_adapters(adapter_rng);
  Rng rng(derive_seed(cfg.seed, "adapter-train"));
  nn::Adam<float> adam(nn::AdamConfig<float>{0.9, 0.999, 1e-8, 1.0});
  auto params = model.params();
  GeneratorTrainResult result;
  for (int step = 0; step < cfg.steps; ++step) {
    nn::zero_grads(params);
    std::vector<std::size_t> batch(static_cast<std::size_t>(cfg.batch_size));
    for (auto& idx : batch)
      idx = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1));
    const double loss = detail::masked_step(model, data, batch, rng, true);
    nn::check_finite(loss, "finetune_adapters");
    if (step == 0) result.initial_loss = loss;
    if (step % 10 == 0 || step == cfg.steps - 1) result.loss_curve.push_back(loss);
    result.final_loss = loss;
    adam.step(params, {{nn::kAdapter, cfg.lr}});
  }
  return result;
}

// Mean masked-token cross-entropy with deterministic masks; used to compare
// base and fine-tuned generators on held-out images.
inline double eval_masked_ce(const GeneratorModel& model,
                             const std::vector<TrainExample>& data,
                             double mask_fraction, std::uint64_t seed) {
  config_check(!data.empty(), "eval_masked_ce: empty dataset");
  const auto& cfg = model.config;
  const int cells = cfg.cells();
  const int m = std::clamp(static_cast<int>(std::ceil(mask_fraction * cells)), 1, cells);
  double total = 0.0;
  Rng rng(derive_seed(seed, "masked-ce"));
  for (const auto& ex : data) {
    TokenGrid input = ex.tokens;
    std::vector<int> targets(static_cast<std::size_t>(cells), -1);
    std::vector<int> order(static_cast<std::size_t>(cells));
    for (int i = 0; i < cells; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < m; ++i) {
      const int j = static_cast<int>(rng.uniform_int(i, cells - 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      const int pos = order[static_cast<std::size_t>(i)];
      targets[static_cast<std::size_t>(pos)] = ex.tokens.ids[static_cast<std::size_t>(pos)];
      input.ids[static_cast<std::size_t>(pos)] = cfg.mask_id();
    }
    Mat<float> logits = detail::forward_batch(model, {&input}, {&ex.prompt_ids}, nullptr);
    total += nn::softmax_xent<float>(logits, targets, nullptr);
  }
  return total / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Checkpoint IO
// ---------------------------------------------------------------------------

inline void save_generator(GeneratorModel& model, const nlohmann::json& extra,
                           const std::string& dir) {
  ensure_dir(dir);
  save_tensors(model.params(), dir + "/generator.bin");
  nlohmann::json meta = {{"kind", "maskgen"},
                         {"config", model.config.to_json()},
                         {"seed", model.config.seed},
                         {"vocab_hash", model.vocab_hash},
                         {"codec_hash", model.codec_hash},
                         {"adapter", model.has_adapters}};
  for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
  write_json_file(meta, dir + "/generator.json");
}

inline GeneratorModel load_generator(const std::string& dir,
                                     nlohmann::json* meta_out = nullptr) {
  nlohmann::json meta = read_json_file(dir + "/generator.json");
  GeneratorModel model;
  Rng rng(0);
  model.init(GeneratorConfig::from_json(meta.at("config")), rng);
  if (meta.value("adapter", false)) {
    Rng arng(0);
    model.add_adapters(arng);
  }
  load_tensors(model.params(), dir + "/generator.bin");
  model.vocab_hash = meta.value("vocab_hash", "");
  model.codec_hash = meta.value("codec_hash", "");
  if (meta_out) *meta_out = meta;
  return model;
}

inline std::string generator_hash(const std::string& dir) {
  return hash_file(dir + "/generator.bin");
}

}  // namespace damagen::maskgen
