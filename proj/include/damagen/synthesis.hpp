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
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "damagen/core/errors.hpp"
#include "damagen/core/hash.hpp"
#include "damagen/core/image.hpp"
#include "damagen/core/parallel.hpp"
#include "damagen/core/rng.hpp"
#include "damagen/masking.hpp"
#include "damagen/maskgen.hpp"
#include "damagen/prompts.hpp"
#include "damagen/scorer.hpp"
#include "damagen/toyworld.hpp"
#include "damagen/vqcodec.hpp"

// End-to-end synthetic supervision: pre-image -> perturbed center mask ->
// tokens -> masked edit -> N decoded candidates -> best-of-N by image-text
// similarity -> labeled synthetic pair. Labels come from the prompt pool.

namespace damagen::synthesis {

struct SynthesisConfig {
  int num_candidates = 4;
  maskgen::DecodeSchedule schedule;
  double patch_frac_h = 0.5;  // H' / H
  double patch_frac_w = 0.5;
  double damaged_fraction = 0.5;
  double volume_fraction = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    config_check(num_candidates >= 1, "synthesis: num_candidates must be >= 1");
    config_check(patch_frac_h > 0.0 && patch_frac_h <= 0.5 && patch_frac_w > 0.0 &&
                     patch_frac_w <= 0.5,
                 "synthesis: patch fractions must lie in (0, 1/2]");
    config_check(damaged_fraction >= 0.0 && damaged_fraction <= 1.0,
                 "synthesis: damaged_fraction must be in [0,1]");
    config_check(volume_fraction > 0.0 && volume_fraction <= 1.0,
                 "synthesis: volume_fraction must be in (0,1]");
    schedule.validate();
  }

  nlohmann::json to_json() const {
    return {{"num_candidates", num_candidates},
            {"decode_steps", schedule.total_steps},
            {"temperature", schedule.temperature},
            {"patch_frac_h", patch_frac_h},
            {"patch_frac_w", patch_frac_w},
            {"damaged_fraction", damaged_fraction},
            {"volume_fraction", volume_fraction},
            {"seed", seed}};
  }
  static SynthesisConfig from_json(const nlohmann::json& j) {
    SynthesisConfig c;
    c.num_candidates = j.value("num_candidates", c.num_candidates);
    c.schedule.total_steps = j.value("decode_steps", c.schedule.total_steps);
    c.schedule.temperature = j.value("temperature", c.schedule.temperature);
    c.patch_frac_h = j.value("patch_frac_h", c.patch_frac_h);
    c.patch_frac_w = j.value("patch_frac_w", c.patch_frac_w);
    c.damaged_fraction = j.value("damaged_fraction", c.damaged_fraction);
    c.volume_fraction = j.value("volume_fraction", c.volume_fraction);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

// Trained models plus the fingerprints that tie them together.
struct ModelBundle {
  vqcodec::CodecModel codec;
  maskgen::GeneratorModel generator;
  scorer::ScorerModel ranker;
  std::vector<std::string> vocabulary;
  std::string codec_hash;
  std::string generator_hash;
  std::string scorer_hash;
};

inline ModelBundle load_models(const std::string& codec_dir, const std::string& generator_dir,
                               const std::string& scorer_dir) {
  ModelBundle bundle;
  bundle.codec = vqcodec::load_codec(codec_dir);
  nlohmann::json gen_meta;
  bundle.generator = maskgen::load_generator(generator_dir, &gen_meta);
  nlohmann::json scorer_meta;
  bundle.ranker = scorer::load_scorer(scorer_dir, &scorer_meta);
  bundle.codec_hash = vqcodec::codec_hash(codec_dir);
  bundle.generator_hash = maskgen::generator_hash(generator_dir);
  bundle.scorer_hash = scorer::scorer_hash(scorer_dir);
  if (bundle.generator.codec_hash != bundle.codec_hash)
    throw ConfigError("model hash mismatch: generator was trained against codec " +
                      bundle.generator.codec_hash + " but " + codec_dir + " holds " +
                      bundle.codec_hash);
  bundle.vocabulary = gen_meta.at("vocabulary").get<std::vector<std::string>>();
  const std::string vocab_hash = prompts::vocabulary_hash(bundle.vocabulary);
  if (gen_meta.value("vocab_hash", "") != vocab_hash)
    throw ConfigError("generator vocabulary hash mismatch in " + generator_dir);
  if (scorer_meta.value("vocab_hash", "") != vocab_hash)
    throw ConfigError("model hash mismatch: scorer vocabulary differs from generator (" +
                      scorer_dir + ")");
  return bundle;
}

struct GenRecord {
  masking::EditMask mask;
  std::string prompt_text;
  int label = 0;
  std::vector<double> candidate_scores;
  int selected = 0;
  std::uint64_t gen_seed = 0;

  nlohmann::json mask_json() const {
    return {{"center_row", mask.center_row},
            {"center_col", mask.center_col},
            {"patch_h", mask.patch_height},
            {"patch_w", mask.patch_width}};
  }
};

struct GeneratedImage {
  Image image;
  double score = 0.0;
  GenRecord record;
  vqcodec::TokenGrid pre_tokens;       // tokens of the input pre image
  vqcodec::TokenGrid selected_tokens;  // tokens of the chosen candidate
};

// One pre-image through the full pipeline. The mask is shared by all N
// candidates; only the decode rng differs between them.
inline GeneratedImage generate_post_image(const Image& pre, const prompts::Prompt& prompt,
                                          const SynthesisConfig& config,
                                          const ModelBundle& models,
                                          std::uint64_t gen_seed) {
  config.validate();
  const auto& codec = models.codec;
  const int img_size = codec.config.image_size;
  contract_check(pre.height == img_size && pre.width == img_size,
                 "generate_post_image: image size mismatch");

  GeneratedImage out;
  out.record.gen_seed = gen_seed;
  out.record.prompt_text = prompt.text;
  out.record.label = prompt.label;

  Rng mask_rng(derive_seed(gen_seed, "mask"));
  const int patch_h = static_cast<int>(std::lround(config.patch_frac_h * img_size));
  const int patch_w = static_cast<int>(std::lround(config.patch_frac_w * img_size));
  out.record.mask = masking::sample_mask(img_size, img_size, patch_h, patch_w, mask_rng);

  auto features = vqcodec::encode(codec, pre);
  out.pre_tokens = vqcodec::quantize(features, codec.codebook, codec.token_rows(),
                                     codec.token_cols());
  auto token_mask = masking::downsample_mask(out.record.mask, codec.config.factor);
  auto masked = masking::apply_mask(out.pre_tokens, token_mask, codec.codebook.mask_id());

  const std::vector<int> prompt_ids =
      prompts::tokenize_prompt(prompt.text, models.vocabulary);

  std::vector<Image> candidates(static_cast<std::size_t>(config.num_candidates));
  std::vector<vqcodec::TokenGrid> candidate_tokens(candidates.size());
  for (int c = 0; c < config.num_candidates; ++c) {
    maskgen::DecodeSchedule schedule = config.schedule;
    schedule.seed = derive_seed(gen_seed, "candidate", static_cast<std::uint64_t>(c));
    candidate_tokens[static_cast<std::size_t>(c)] =
        maskgen::parallel_decode(models.generator, masked, prompt_ids, schedule);
    candidates[static_cast<std::size_t>(c)] =
        vqcodec::decode(codec, candidate_tokens[static_cast<std::size_t>(c)]);
  }

  if (config.num_candidates == 1) {
    out.record.selected = 0;
    out.record.candidate_scores = {0.0};
    out.score = 0.0;
  } else {
    auto selection = scorer::select_best(models.ranker, candidates, prompt_ids);
    out.record.selected = selection.index;
    out.record.candidate_scores = selection.all_scores;
    out.score = selection.score;
  }
  out.image = std::move(candidates[static_cast<std::size_t>(out.record.selected)]);
  out.selected_tokens = candidate_tokens[static_cast<std::size_t>(out.record.selected)];
  return out;
}

// Deterministic nested subsample: the first round(p * n) positions of one
// seed-fixed permutation, so smaller fractions are strict subsets of larger
// ones under the same seed.
inline std::vector<std::size_t> select_volume_subset(std::size_t n_targets, double fraction,
                                                     std::uint64_t seed) {
  config_check(fraction > 0.0 && fraction <= 1.0, "volume fraction must be in (0,1]");
  Rng rng(derive_seed(seed, "volume-order"));
  auto perm = rng.permutation(n_targets);
  const auto take = static_cast<std::size_t>(
      std::lround(fraction * static_cast<double>(n_targets)));
  perm.resize(std::max<std::size_t>(1, std::min(take, n_targets)));
  return perm;
}

// Damaged/undamaged assignment along the permutation order: every prefix
// carries round(k * fraction) damaged entries within one item.
inline bool damaged_at_position(std::size_t position, double fraction) {
  const double lo = std::floor(static_cast<double>(position) * fraction);
  const double hi = std::floor(static_cast<double>(position + 1) * fraction);
  return hi - lo >= 1.0;
}

// Synthesizes the labeled target dataset and writes it as a self-contained
// image directory plus JSONL manifest.
inline toyworld::DatasetManifest synthesize_dataset(
    const std::vector<toyworld::TargetExample>& targets,
    const std::vector<std::string>& target_ids, const SynthesisConfig& config,
    const ModelBundle& models, const prompts::PromptPool& damaged_pool,
    const prompts::PromptPool& undamaged_pool, const std::string& out_root) {
  config.validate();
  config_check(!targets.empty(), "synthesize_dataset: empty target list");
  contract_check(targets.size() == target_ids.size(),
                 "synthesize_dataset: id list mismatch");
  config_check(damaged_pool.prompts.front().label == 1,
               "synthesize_dataset: damaged pool must carry label 1");
  config_check(undamaged_pool.prompts.front().label == 0,
               "synthesize_dataset: undamaged pool must carry label 0");

  const auto chosen = select_volume_subset(targets.size(), config.volume_fraction,
                                           config.seed);
  const std::string domain = targets.front().domain;
  const std::filesystem::path root(out_root);
  ensure_dir((root / domain / "train").string());

  struct Job {
    std::size_t target_index;
    bool damaged;
  };
  std::vector<Job> jobs(chosen.size());
  for (std::size_t k = 0; k < chosen.size(); ++k)
    jobs[k] = {chosen[k], damaged_at_position(k, config.damaged_fraction)};
  // manifest rows come out in target order regardless of worker scheduling
  std::sort(jobs.begin(), jobs.end(),
            [](const Job& a, const Job& b) { return a.target_index < b.target_index; });

  nlohmann::json model_hashes = {{"codec", models.codec_hash},
                                 {"generator", models.generator_hash},
                                 {"scorer", models.scorer_hash}};

  std::vector<toyworld::ManifestEntry> entries(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const Job& job = jobs[j];
    const auto& target = targets[job.target_index];
    const std::string& id = target_ids[job.target_index];
    const std::uint64_t gen_seed =
        derive_seed(config.seed, "gen", static_cast<std::uint64_t>(job.target_index));
    Rng prompt_rng(derive_seed(gen_seed, "prompt"));
    const prompts::Prompt& prompt =
        prompts::sample_prompt(job.damaged ? damaged_pool : undamaged_pool, prompt_rng);
    GeneratedImage gen = generate_post_image(target.pre, prompt, config, models, gen_seed);

    toyworld::ManifestEntry e;
    e.id = id;
    e.domain = domain;
    e.split = "train";
    e.provenance = toyworld::Provenance::synthetic;
    e.label = prompt.label;
    e.prompt = prompt.text;
    e.selection_score = gen.score;
    e.candidate_index = gen.record.selected;
    e.gen_seed = gen_seed;
    e.mask = gen.record.mask_json();
    e.model_hashes = model_hashes;
    e.pre_path = toyworld::entry_image_path(domain, "train", id, true);
    e.post_path = toyworld::entry_image_path(domain, "train", id, false);
    save_png(target.pre, (root / e.pre_path).string());
    save_png(gen.image, (root / *e.post_path).string());
    entries[j] = std::move(e);
  });

  toyworld::DatasetManifest manifest;
  manifest.root = out_root;
  manifest.entries = std::move(entries);
  toyworld::write_manifest(manifest, (root / (domain + ".jsonl")).string());
  return manifest;
}

}  // namespace damagen::synthesis
