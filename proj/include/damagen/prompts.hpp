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
#include <cctype>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "damagen/core/errors.hpp"
#include "damagen/core/hash.hpp"
#include "damagen/core/rng.hpp"
#include "damagen/toyworld.hpp"

// Prompt pools and their tokenization. The pool a prompt comes from fixes the
// binary label of every image generated with it: damaged pools are 1,
// undamaged pools are 0.

namespace damagen::prompts {

constexpr int kSeqLen = 16;
constexpr int kUnkId = 0;  // ids [1, vocab] are words; PAD is vocab + 1

struct Prompt {
  std::string text;
  int label = 0;
  toyworld::DisasterKind disaster_kind = toyworld::DisasterKind::hurricane;
  std::string pool_name;
};

struct PromptPool {
  std::string name;
  std::vector<Prompt> prompts;
  std::vector<std::string> vocabulary;  // sorted unique lowercase word types
};

inline std::vector<std::string> split_words(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u))
      cleaned.push_back(static_cast<char>(std::tolower(u)));
    else if (std::isspace(u))
      cleaned.push_back(' ');
    // other punctuation is dropped entirely
  }
  std::vector<std::string> words;
  std::size_t at = 0;
  while (at < cleaned.size()) {
    while (at < cleaned.size() && cleaned[at] == ' ') ++at;
    std::size_t end = at;
    while (end < cleaned.size() && cleaned[end] != ' ') ++end;
    if (end > at) words.push_back(cleaned.substr(at, end - at));
    at = end;
  }
  return words;
}

inline std::vector<std::string> build_vocabulary(const std::vector<PromptPool>& pools) {
  std::set<std::string> words;
  for (const auto& pool : pools)
    for (const auto& p : pool.prompts)
      for (const auto& w : split_words(p.text)) words.insert(w);
  return {words.begin(), words.end()};
}

// Lowercase, strip punctuation, whitespace-split, map to ids, pad/truncate to
// kSeqLen. Unknown words map to UNK (0); padding uses vocab_size + 1.
inline std::vector<int> tokenize_prompt(const std::string& text,
                                        const std::vector<std::string>& vocabulary) {
  const int pad_id = static_cast<int>(vocabulary.size()) + 1;
  std::vector<int> ids;
  ids.reserve(kSeqLen);
  for (const auto& w : split_words(text)) {
    if (static_cast<int>(ids.size()) == kSeqLen) break;
    auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), w);
    if (it != vocabulary.end() && *it == w)
      ids.push_back(static_cast<int>(it - vocabulary.begin()) + 1);
    else
      ids.push_back(kUnkId);
  }
  while (static_cast<int>(ids.size()) < kSeqLen) ids.push_back(pad_id);
  return ids;
}

// Total table size for an embedding over a vocabulary: UNK + words + PAD.
inline int embedding_count(const std::vector<std::string>& vocabulary) {
  return static_cast<int>(vocabulary.size()) + 2;
}

inline std::string vocabulary_hash(const std::vector<std::string>& vocabulary) {
  std::string joined;
  for (const auto& w : vocabulary) {
    joined += w;
    joined.push_back('\n');
  }
  return hex64(fnv1a64(joined));
}

namespace detail {

inline PromptPool make_pool(const std::string& name, int label,
                            toyworld::DisasterKind kind,
                            std::vector<std::string> texts) {
  PromptPool pool;
  pool.name = name;
  for (auto& t : texts) {
    Prompt p;
    p.text = std::move(t);
    p.label = label;
    p.disaster_kind = kind;
    p.pool_name = name;
    pool.prompts.push_back(std::move(p));
  }
  pool.vocabulary = build_vocabulary({pool});
  return pool;
}

}  // namespace detail

// Fixed pools. The four benchmark-dataset pools carry the exact sentences
// used with the real SKAI and xBD imagery; the toy pools mirror their shape
// for the procedural disasters.
inline PromptPool build_pool(const std::string& kind) {
  using DK = toyworld::DisasterKind;
  if (kind == "skai_damaged") {
    return detail::make_pool(kind, 1, DK::hurricane,
        {"An aerial view of a house damaged due to a hurricane.",
         "A bird's-eye view of a building destroyed by a hurricane.",
         "A top-down view of a house damaged by a hurricane.",
         "A satellite image of a building destroyed by a hurricane.",
         "A bird's-eye view of a building damaged by a hurricane."});
  }
  if (kind == "skai_undamaged") {
    return detail::make_pool(kind, 0, DK::hurricane,
        {"A satellite image of a house covered by trees.",
         "A bird's-eye view of a house surrounded by trees.",
         "A top-down view of a house under tree shade.",
         "An aerial view of an intact house under tree shade."});
  }
  if (kind == "moore_tornado") {
    return detail::make_pool(kind, 1, DK::tornado,
        {"An aerial view of a house damaged due to a tornado.",
         "A bird's-eye view of a building destroyed by a tornado.",
         "A top-down view of a house damaged by a tornado.",
         "A satellite image of a building destroyed by a tornado.",
         "A bird's-eye view of a building damaged by a tornado."});
  }
  if (kind == "nepal_floods") {
    return detail::make_pool(kind, 1, DK::flood,
        {"An aerial view of houses surrounded by a flood.",
         "A top-down view of houses damaged by floods.",
         "A top-down view of a house damaged by floods inundated in water.",
         "A satellite image of a building destroyed by a flood surrounded by water.",
         "A satellite image of houses that was destroyed by a flood surrounded by water and trees."});
  }
  if (kind == "portugal_wildfire") {
    return detail::make_pool(kind, 1, DK::wildfire,
        {"An aerial view of forest land after it is torched by a wildfire.",
         "An aerial view of buildings after a wildfire.",
         "An aerial image of forest land scorched by a wildfire.",
         "A bird's-eye view of a forest region with completely scorched trees."});
  }
  if (kind == "toy_hurricane_damaged") {
    return detail::make_pool(kind, 1, DK::hurricane,
        {"An aerial view of a building damaged by a hurricane.",
         "A top-down view of a roof torn apart by a hurricane.",
         "A satellite image of a building destroyed by a hurricane.",
         "A bird's-eye view of debris scattered around a house after a hurricane.",
         "An overhead view of a house wrecked by a hurricane."});
  }
  if (kind == "toy_tornado_damaged") {
    return detail::make_pool(kind, 1, DK::tornado,
        {"An aerial view of a building damaged by a tornado.",
         "A top-down view of a roof ripped open by a tornado.",
         "A satellite image of a building destroyed by a tornado.",
         "A bird's-eye view of a debris trail across a house after a tornado.",
         "An overhead view of a house wrecked by a tornado."});
  }
  if (kind == "toy_flood_damaged") {
    return detail::make_pool(kind, 1, DK::flood,
        {"An aerial view of a building surrounded by flood water.",
         "A top-down view of a house inundated by a flood.",
         "A satellite image of a building damaged by a flood.",
         "A bird's-eye view of muddy water around a flooded house.",
         "An overhead view of a house standing in flood water."});
  }
  if (kind == "toy_wildfire_damaged") {
    return detail::make_pool(kind, 1, DK::wildfire,
        {"An aerial view of a building scorched by a wildfire.",
         "A top-down view of charred ground around a house after a wildfire.",
         "A satellite image of a building damaged by a wildfire.",
         "A bird's-eye view of burned vegetation around a house.",
         "An overhead view of a house singed by a wildfire."});
  }
  if (kind == "toy_undamaged") {
    return detail::make_pool(kind, 0, DK::hurricane,
        {"An aerial view of an intact building.",
         "A satellite image of a building with an undamaged roof.",
         "A top-down view of a house in good condition.",
         "A bird's-eye view of an intact house.",
         "An overhead view of an undamaged building."});
  }
  throw ConfigError("unknown prompt pool kind: " + kind);
}

inline std::string toy_damaged_pool_name(toyworld::DisasterKind kind) {
  return "toy_" + toyworld::to_string(kind) + "_damaged";
}

inline const Prompt& sample_prompt(const PromptPool& pool, Rng& rng) {
  contract_check(!pool.prompts.empty(), "sample_prompt: empty pool " + pool.name);
  const auto i = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(pool.prompts.size()) - 1));
  return pool.prompts[i];
}

inline void to_json(nlohmann::json& j, const PromptPool& pool) {
  nlohmann::json prompts = nlohmann::json::array();
  for (const auto& p : pool.prompts)
    prompts.push_back({{"text", p.text},
                       {"label", p.label},
                       {"disaster_kind", toyworld::to_string(p.disaster_kind)}});
  j = {{"name", pool.name}, {"prompts", prompts}, {"vocabulary", pool.vocabulary}};
}

inline void from_json(const nlohmann::json& j, PromptPool& pool) {
  pool.name = j.at("name").get<std::string>();
  pool.prompts.clear();
  for (const auto& item : j.at("prompts")) {
    Prompt p;
    p.text = item.at("text").get<std::string>();
    p.label = item.at("label").get<int>();
    config_check(p.label == 0 || p.label == 1, "prompt label must be 0 or 1");
    p.disaster_kind =
        toyworld::disaster_from_string(item.value("disaster_kind", "hurricane"));
    p.pool_name = pool.name;
    pool.prompts.push_back(std::move(p));
  }
  config_check(!pool.prompts.empty(), "prompt pool must be nonempty: " + pool.name);
  if (j.contains("vocabulary"))
    pool.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  else
    pool.vocabulary = build_vocabulary({pool});
  int label = pool.prompts.front().label;
  for (const auto& p : pool.prompts)
    config_check(p.label == label, "pool mixes labels: " + pool.name);
}

}  // namespace damagen::prompts
