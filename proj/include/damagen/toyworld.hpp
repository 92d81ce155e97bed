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
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "damagen/core/errors.hpp"
#include "damagen/core/image.hpp"
#include "damagen/core/parallel.hpp"
#include "damagen/core/rng.hpp"
#include "damagen/core/serialize.hpp"

// Procedural multi-domain disaster scenes: a textured ground plane with
// scattered clutter and one rectangular building near the image center. The
// post image either applies mild photometric jitter (undamaged) or a
// disaster-specific localized transform plus the same jitter (damaged).

namespace damagen::toyworld {

constexpr int kImageSize = 64;

enum class DisasterKind { hurricane, tornado, flood, wildfire };

inline std::string to_string(DisasterKind k) {
  switch (k) {
    case DisasterKind::hurricane: return "hurricane";
    case DisasterKind::tornado: return "tornado";
    case DisasterKind::flood: return "flood";
    case DisasterKind::wildfire: return "wildfire";
  }
  throw ContractError("unknown disaster kind");
}

inline DisasterKind disaster_from_string(const std::string& s) {
  if (s == "hurricane") return DisasterKind::hurricane;
  if (s == "tornado") return DisasterKind::tornado;
  if (s == "flood") return DisasterKind::flood;
  if (s == "wildfire") return DisasterKind::wildfire;
  throw ConfigError("unknown disaster kind: " + s);
}

struct DomainSpec {
  std::string name;
  DisasterKind disaster_kind = DisasterKind::hurricane;
  double background_hue = 0.0;   // degrees [0, 360)
  double texture_noise = 0.5;    // [0, 1]
  double clutter_density = 0.5;  // [0, 1]
  std::uint64_t seed = 0;

  void validate() const {
    config_check(!name.empty(), "domain name must be nonempty");
    config_check(background_hue >= 0.0 && background_hue < 360.0,
                 "background_hue out of [0,360): " + name);
    config_check(texture_noise >= 0.0 && texture_noise <= 1.0,
                 "texture_noise out of [0,1]: " + name);
    config_check(clutter_density >= 0.0 && clutter_density <= 1.0,
                 "clutter_density out of [0,1]: " + name);
  }
};

inline void to_json(nlohmann::json& j, const DomainSpec& d) {
  j = {{"name", d.name},
       {"disaster_kind", to_string(d.disaster_kind)},
       {"background_hue", d.background_hue},
       {"texture_noise", d.texture_noise},
       {"clutter_density", d.clutter_density},
       {"seed", d.seed}};
}

inline void from_json(const nlohmann::json& j, DomainSpec& d) {
  d.name = j.at("name").get<std::string>();
  d.disaster_kind = disaster_from_string(j.at("disaster_kind").get<std::string>());
  d.background_hue = j.at("background_hue").get<double>();
  d.texture_noise = j.at("texture_noise").get<double>();
  d.clutter_density = j.at("clutter_density").get<double>();
  d.seed = j.at("seed").get<std::uint64_t>();
  d.validate();
}

enum class Provenance { procedural, ingested, synthetic };

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::procedural: return "procedural";
    case Provenance::ingested: return "ingested";
    case Provenance::synthetic: return "synthetic";
  }
  throw ContractError("unknown provenance");
}

inline Provenance provenance_from_string(const std::string& s) {
  if (s == "procedural") return Provenance::procedural;
  if (s == "ingested") return Provenance::ingested;
  if (s == "synthetic") return Provenance::synthetic;
  throw DataError("unknown provenance: " + s);
}

struct LabeledPair {
  Image pre;
  Image post;
  int label = 0;  // 1 = damaged
  std::string domain;
  Provenance provenance = Provenance::procedural;
};

struct TargetExample {
  Image pre;
  std::string domain;
};

// One JSONL record. Optional fields are written only when present; entries
// without label and post_path load as target examples.
struct ManifestEntry {
  std::string id;
  std::string pre_path;
  std::optional<std::string> post_path;
  std::optional<int> label;
  std::string domain;
  std::string split = "train";
  Provenance provenance = Provenance::procedural;
  // procedural render parameters, kept so materialization can be deferred
  std::optional<std::uint64_t> scene_seed;
  // synthetic provenance
  std::optional<std::string> prompt;
  std::optional<double> selection_score;
  std::optional<int> candidate_index;
  std::optional<std::uint64_t> gen_seed;
  std::optional<nlohmann::json> mask;
  std::optional<nlohmann::json> model_hashes;
};

struct DatasetManifest {
  std::string root;  // directory that relative paths resolve against
  std::vector<ManifestEntry> entries;
};

inline nlohmann::json entry_to_json(const ManifestEntry& e) {
  nlohmann::json j = {{"id", e.id},
                      {"pre_path", e.pre_path},
                      {"domain", e.domain},
                      {"split", e.split},
                      {"provenance", to_string(e.provenance)}};
  if (e.post_path) j["post_path"] = *e.post_path;
  if (e.label) j["label"] = *e.label;
  if (e.scene_seed) j["scene_seed"] = *e.scene_seed;
  if (e.prompt) j["prompt"] = *e.prompt;
  if (e.selection_score) j["selection_score"] = *e.selection_score;
  if (e.candidate_index) j["candidate_index"] = *e.candidate_index;
  if (e.gen_seed) j["gen_seed"] = *e.gen_seed;
  if (e.mask) j["mask"] = *e.mask;
  if (e.model_hashes) j["model_hashes"] = *e.model_hashes;
  return j;
}

inline ManifestEntry entry_from_json(const nlohmann::json& j) {
  ManifestEntry e;
  e.id = j.at("id").get<std::string>();
  e.pre_path = j.at("pre_path").get<std::string>();
  e.domain = j.at("domain").get<std::string>();
  e.split = j.value("split", "train");
  if (e.split != "train" && e.split != "val" && e.split != "test")
    throw DataError("invalid split value: " + e.split);
  e.provenance = provenance_from_string(j.value("provenance", "procedural"));
  if (j.contains("post_path")) e.post_path = j.at("post_path").get<std::string>();
  if (j.contains("label")) {
    int y = j.at("label").get<int>();
    if (y != 0 && y != 1) throw DataError("label must be 0 or 1");
    e.label = y;
  }
  if (j.contains("scene_seed")) e.scene_seed = j.at("scene_seed").get<std::uint64_t>();
  if (j.contains("prompt")) e.prompt = j.at("prompt").get<std::string>();
  if (j.contains("selection_score")) e.selection_score = j.at("selection_score").get<double>();
  if (j.contains("candidate_index")) e.candidate_index = j.at("candidate_index").get<int>();
  if (j.contains("gen_seed")) e.gen_seed = j.at("gen_seed").get<std::uint64_t>();
  if (j.contains("mask")) e.mask = j.at("mask");
  if (j.contains("model_hashes")) e.model_hashes = j.at("model_hashes");
  return e;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint8_t clamp255(int v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
}

struct Rgb {
  int r, g, b;
};

inline Rgb hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 360.0);
  if (h < 0) h += 360.0;
  const double c = v * s;
  const double x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  if (h < 60) {
    r = c; g = x;
  } else if (h < 120) {
    r = x; g = c;
  } else if (h < 180) {
    g = c; b = x;
  } else if (h < 240) {
    g = x; b = c;
  } else if (h < 300) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  return {static_cast<int>(std::round((r + m) * 255.0)),
          static_cast<int>(std::round((g + m) * 255.0)),
          static_cast<int>(std::round((b + m) * 255.0))};
}

struct Rect {
  int top, left, height, width;
  int bottom() const { return top + height; }
  int right() const { return left + width; }
  bool contains(int r, int c) const {
    return r >= top && r < bottom() && c >= left && c < right();
  }
  Rect dilated(int by, int img_h, int img_w) const {
    Rect d{std::max(0, top - by), std::max(0, left - by), 0, 0};
    d.height = std::min(img_h, bottom() + by) - d.top;
    d.width = std::min(img_w, right() + by) - d.left;
    return d;
  }
};

struct Clutter {
  int row, col, radius;
  bool round;  // round = vegetation, square = rock
};

struct Scene {
  Rect building;
  Rect roof;
  Rgb wall_color;
  Rgb roof_color;
  Rgb ground_base;
  std::vector<Clutter> clutter;
};

inline void set_px(Image& img, int r, int c, const Rgb& color) {
  img.at(r, c, 0) = clamp255(color.r);
  img.at(r, c, 1) = clamp255(color.g);
  img.at(r, c, 2) = clamp255(color.b);
}

inline Rgb jitter_color(const Rgb& base, Rng& rng, int amp) {
  return {base.r + static_cast<int>(rng.uniform_int(-amp, amp)),
          base.g + static_cast<int>(rng.uniform_int(-amp, amp)),
          base.b + static_cast<int>(rng.uniform_int(-amp, amp))};
}

}  // namespace detail

// Deterministic scene render. The building center always falls inside the
// central H/4 x W/4 window.
inline Image render_scene(const DomainSpec& domain, std::uint64_t scene_seed,
                          detail::Scene* out_scene) {
  domain.validate();
  const int n = kImageSize;
  Rng rng(derive_seed(domain.seed, "scene", scene_seed));
  Image img(n, n);

  // ground plane: hue-tinted base color with coarse value noise
  const double sat = 0.40 + 0.12 * rng.uniform01();
  const double val = 0.45 + 0.18 * rng.uniform01();
  detail::Rgb base = detail::hsv_to_rgb(domain.background_hue + rng.uniform_real(-8.0, 8.0),
                                        sat, val);
  const int coarse = 9;
  std::vector<double> grid(coarse * coarse);
  const double coarse_amp = 14.0 + 34.0 * domain.texture_noise;
  for (auto& g : grid) g = rng.uniform_real(-coarse_amp, coarse_amp);
  const int fine_amp = 3 + static_cast<int>(std::round(7.0 * domain.texture_noise));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double gy = static_cast<double>(r) / (n - 1) * (coarse - 1);
      const double gx = static_cast<double>(c) / (n - 1) * (coarse - 1);
      const int y0 = static_cast<int>(gy), x0 = static_cast<int>(gx);
      const int y1 = std::min(y0 + 1, coarse - 1), x1 = std::min(x0 + 1, coarse - 1);
      const double fy = gy - y0, fx = gx - x0;
      const double v00 = grid[y0 * coarse + x0], v01 = grid[y0 * coarse + x1];
      const double v10 = grid[y1 * coarse + x0], v11 = grid[y1 * coarse + x1];
      const double noise = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                           fy * ((1 - fx) * v10 + fx * v11);
      const int fine = static_cast<int>(rng.uniform_int(-fine_amp, fine_amp));
      const int off = static_cast<int>(std::round(noise)) + fine;
      detail::set_px(img, r, c, {base.r + off, base.g + off, base.b + off});
    }
  }

  detail::Scene scene;
  scene.ground_base = base;

  // building: center inside the central quarter window
  const int quarter = n / 8;  // half-extent of the H/4 window
  const int cr = static_cast<int>(rng.uniform_int(n / 2 - quarter, n / 2 + quarter - 1));
  const int cc = static_cast<int>(rng.uniform_int(n / 2 - quarter, n / 2 + quarter - 1));
  const int bh = static_cast<int>(rng.uniform_int(14, 22));
  const int bw = static_cast<int>(rng.uniform_int(14, 22));
  scene.building = {cr - bh / 2, cc - bw / 2, bh, bw};
  scene.roof = {scene.building.top + 2, scene.building.left + 2, bh - 4, bw - 4};

  // clutter: round vegetation and square rocks, kept off the building
  const int clutter_n = static_cast<int>(std::round(4.0 + 12.0 * domain.clutter_density));
  detail::Rect keep_out = scene.building.dilated(2, n, n);
  for (int i = 0; i < clutter_n; ++i) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      const int r = static_cast<int>(rng.uniform_int(2, n - 3));
      const int c = static_cast<int>(rng.uniform_int(2, n - 3));
      if (keep_out.contains(r, c)) continue;
      const int radius = static_cast<int>(rng.uniform_int(2, 4));
      const bool round = rng.uniform01() < 0.7;
      scene.clutter.push_back({r, c, radius, round});
      detail::Rgb color =
          round ? detail::hsv_to_rgb(domain.background_hue + rng.uniform_real(10.0, 40.0),
                                     0.55, 0.30 + 0.1 * rng.uniform01())
                : detail::Rgb{110, 108, 104};
      color = detail::jitter_color(color, rng, 10);
      for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
          const int rr = r + dr, ccc = c + dc;
          if (rr < 0 || rr >= n || ccc < 0 || ccc >= n) continue;
          if (round && dr * dr + dc * dc > radius * radius) continue;
          detail::set_px(img, rr, ccc, detail::jitter_color(color, rng, 6));
        }
      }
      break;
    }
  }

  // building walls and roof
  scene.wall_color = detail::jitter_color({168, 160, 150}, rng, 14);
  const bool warm_roof = rng.uniform01() < 0.5;
  scene.roof_color = warm_roof ? detail::jitter_color({150, 84, 70}, rng, 16)
                               : detail::jitter_color({96, 100, 110}, rng, 14);
  for (int r = scene.building.top; r < scene.building.bottom(); ++r)
    for (int c = scene.building.left; c < scene.building.right(); ++c)
      detail::set_px(img, r, c, detail::jitter_color(scene.wall_color, rng, 5));
  for (int r = scene.roof.top; r < scene.roof.bottom(); ++r)
    for (int c = scene.roof.left; c < scene.roof.right(); ++c)
      detail::set_px(img, r, c, detail::jitter_color(scene.roof_color, rng, 5));
  // roof ridge
  const int ridge = scene.roof.top + scene.roof.height / 2;
  for (int c = scene.roof.left; c < scene.roof.right(); ++c) {
    detail::Rgb bright{scene.roof_color.r + 28, scene.roof_color.g + 28,
                       scene.roof_color.b + 28};
    detail::set_px(img, ridge, c, bright);
  }

  if (out_scene) *out_scene = scene;
  return img;
}

namespace detail {

// Capture-to-capture photometric drift shared by damaged and undamaged posts.
inline void apply_photometric_jitter(Image& img, Rng& rng) {
  const int off_r = static_cast<int>(rng.uniform_int(-5, 5));
  const int off_g = static_cast<int>(rng.uniform_int(-5, 5));
  const int off_b = static_cast<int>(rng.uniform_int(-5, 5));
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const int n0 = static_cast<int>(rng.uniform_int(-2, 2));
      const int n1 = static_cast<int>(rng.uniform_int(-2, 2));
      const int n2 = static_cast<int>(rng.uniform_int(-2, 2));
      img.at(r, c, 0) = clamp255(img.at(r, c, 0) + off_r + n0);
      img.at(r, c, 1) = clamp255(img.at(r, c, 1) + off_g + n1);
      img.at(r, c, 2) = clamp255(img.at(r, c, 2) + off_b + n2);
    }
  }
}

// Scatter roof/wall pixels into the dilated bounding box, leaving rubble.
inline void scatter_building(Image& img, const Scene& scene, Rng& rng,
                             double scatter_prob, int dilate) {
  const Rect zone = scene.building.dilated(dilate, img.height, img.width);
  const Rgb rubble{92, 88, 84};
  for (int r = scene.building.top; r < scene.building.bottom(); ++r) {
    for (int c = scene.building.left; c < scene.building.right(); ++c) {
      if (rng.uniform01() >= scatter_prob) continue;
      const Rgb moved{img.at(r, c, 0), img.at(r, c, 1), img.at(r, c, 2)};
      set_px(img, r, c, jitter_color(rubble, rng, 12));
      const int tr = static_cast<int>(rng.uniform_int(zone.top, zone.bottom() - 1));
      const int tc = static_cast<int>(rng.uniform_int(zone.left, zone.right() - 1));
      set_px(img, tr, tc, moved);
    }
  }
}

inline void speckle(Image& img, const Rect& zone, Rng& rng, int count, const Rgb& color,
                    int amp) {
  for (int i = 0; i < count; ++i) {
    const int r = static_cast<int>(rng.uniform_int(zone.top, zone.bottom() - 1));
    const int c = static_cast<int>(rng.uniform_int(zone.left, zone.right() - 1));
    set_px(img, r, c, jitter_color(color, rng, amp));
  }
}

inline void apply_disaster(Image& img, const Scene& scene, DisasterKind kind, Rng& rng) {
  const int n = img.height;
  switch (kind) {
    case DisasterKind::hurricane: {
      scatter_building(img, scene, rng, 0.55, 7);
      speckle(img, scene.building.dilated(9, n, n), rng, 90, {176, 170, 162}, 30);
      break;
    }
    case DisasterKind::tornado: {
      scatter_building(img, scene, rng, 0.75, 10);
      // debris streak along a random direction through the building
      const double angle = rng.uniform_real(0.0, 6.283185307179586);
      const double dr = std::sin(angle), dc = std::cos(angle);
      const int cr = scene.building.top + scene.building.height / 2;
      const int cc = scene.building.left + scene.building.width / 2;
      for (int s = -20; s <= 20; ++s) {
        for (int w = -2; w <= 2; ++w) {
          const int r = cr + static_cast<int>(std::round(s * dr + w * dc));
          const int c = cc + static_cast<int>(std::round(s * dc - w * dr));
          if (r < 0 || r >= n || c < 0 || c >= n) continue;
          if (rng.uniform01() < 0.5)
            set_px(img, r, c, jitter_color({120, 112, 104}, rng, 18));
        }
      }
      break;
    }
    case DisasterKind::flood: {
      // water pool over the ground around the building, partial inundation
      const int cr = scene.building.top + scene.building.height / 2;
      const int cc = scene.building.left + scene.building.width / 2;
      const double radius =
          1.6 * std::max(scene.building.height, scene.building.width) +
          rng.uniform_real(0.0, 4.0);
      const Rgb water{66, 88, 126};
      const int waterline =
          scene.building.bottom() - scene.building.height * 2 / 5;
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
          const double d = std::hypot(r - cr, c - cc);
          if (d > radius + rng.uniform_real(-2.0, 2.0)) continue;
          const bool inside = scene.building.contains(r, c);
          if (inside && r < waterline) continue;  // upper storeys stay dry
          Rgb w = jitter_color(water, rng, 10);
          if (inside) w = {(w.r + scene.wall_color.r) / 2, (w.g + scene.wall_color.g) / 2,
                           (w.b + scene.wall_color.b) / 2};
          set_px(img, r, c, w);
        }
      }
      break;
    }
    case DisasterKind::wildfire: {
      // scorch the vegetation and ground near the building, char speckles
      const int cr = scene.building.top + scene.building.height / 2;
      const int cc = scene.building.left + scene.building.width / 2;
      const double radius = 2.0 * std::max(scene.building.height, scene.building.width);
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
          if (scene.building.contains(r, c)) continue;
          const double d = std::hypot(r - cr, c - cc);
          if (d > radius + rng.uniform_real(-3.0, 3.0)) continue;
          img.at(r, c, 0) = static_cast<std::uint8_t>(img.at(r, c, 0) * 0.38);
          img.at(r, c, 1) = static_cast<std::uint8_t>(img.at(r, c, 1) * 0.34);
          img.at(r, c, 2) = static_cast<std::uint8_t>(img.at(r, c, 2) * 0.32);
        }
      }
      speckle(img, scene.building.dilated(12, n, n), rng, 130, {30, 26, 24}, 10);
      // singe the building rim
      const Rect b = scene.building;
      for (int c = b.left; c < b.right(); ++c) {
        for (int r : {b.top, b.bottom() - 1}) {
          if (rng.uniform01() < 0.6) set_px(img, r, c, jitter_color({52, 44, 40}, rng, 10));
        }
      }
      for (int r = b.top; r < b.bottom(); ++r) {
        for (int c : {b.left, b.right() - 1}) {
          if (rng.uniform01() < 0.6) set_px(img, r, c, jitter_color({52, 44, 40}, rng, 10));
        }
      }
      break;
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline LabeledPair render_pair(const DomainSpec& domain, std::uint64_t scene_seed,
                               bool damaged) {
  detail::Scene scene;
  LabeledPair pair;
  pair.pre = render_scene(domain, scene_seed, &scene);
  pair.post = pair.pre;
  Rng post_rng(derive_seed(domain.seed, damaged ? "post-damaged" : "post-intact",
                           scene_seed));
  if (damaged) detail::apply_disaster(pair.post, scene, domain.disaster_kind, post_rng);
  detail::apply_photometric_jitter(pair.post, post_rng);
  pair.label = damaged ? 1 : 0;
  pair.domain = domain.name;
  pair.provenance = Provenance::procedural;
  return pair;
}

inline std::string entry_image_path(const std::string& domain, const std::string& split,
                                    const std::string& id, bool pre) {
  return domain + "/" + split + "/" + id + (pre ? "_pre.png" : "_post.png");
}

// Logical dataset: exactly round(n * damage_rate) damaged entries, assignment
// shuffled under the seed. Images are written later by materialize().
inline DatasetManifest build_dataset(const DomainSpec& domain, int n, double damage_rate,
                                     std::uint64_t seed) {
  domain.validate();
  config_check(n >= 1, "build_dataset: n must be >= 1");
  config_check(damage_rate >= 0.0 && damage_rate <= 1.0,
               "build_dataset: damage_rate must be in [0,1]");
  const int damaged_count = static_cast<int>(std::lround(n * damage_rate));
  Rng rng(derive_seed(seed, "damage-assign"));
  auto perm = rng.permutation(static_cast<std::size_t>(n));
  std::vector<bool> damaged(static_cast<std::size_t>(n), false);
  for (int i = 0; i < damaged_count; ++i) damaged[perm[static_cast<std::size_t>(i)]] = true;

  DatasetManifest manifest;
  manifest.entries.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ManifestEntry e;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", i);
    e.id = buf;
    e.domain = domain.name;
    e.split = "train";
    e.label = damaged[static_cast<std::size_t>(i)] ? 1 : 0;
    e.scene_seed = derive_seed(seed, "scene-seed", static_cast<std::uint64_t>(i));
    e.pre_path = entry_image_path(e.domain, e.split, e.id, true);
    e.post_path = entry_image_path(e.domain, e.split, e.id, false);
    e.provenance = Provenance::procedural;
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

// Stratified three-way split; per-label largest-remainder allocation keeps
// label proportions within one item per split.
inline std::array<DatasetManifest, 3> split_dataset(const DatasetManifest& manifest,
                                                    std::array<double, 3> fractions,
                                                    std::uint64_t seed) {
  const double sum = fractions[0] + fractions[1] + fractions[2];
  config_check(std::abs(sum - 1.0) <= 1e-9, "split fractions must sum to 1");
  config_check(fractions[0] >= 0 && fractions[1] >= 0 && fractions[2] >= 0,
               "split fractions must be nonnegative");

  std::array<DatasetManifest, 3> out;
  for (auto& m : out) m.root = manifest.root;
  const char* split_names[3] = {"train", "val", "test"};

  // strata: label 0, label 1, unlabeled
  std::array<std::vector<std::size_t>, 3> strata;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    strata[e.label ? (*e.label ? 1 : 0) : 2].push_back(i);
  }
  Rng rng(derive_seed(seed, "split"));
  for (auto& stratum : strata) {
    if (stratum.empty()) continue;
    auto perm = rng.permutation(stratum.size());
    std::vector<std::size_t> shuffled(stratum.size());
    for (std::size_t i = 0; i < stratum.size(); ++i) shuffled[i] = stratum[perm[i]];

    const auto total = static_cast<double>(stratum.size());
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double want = fractions[static_cast<std::size_t>(s)] * total;
      counts[static_cast<std::size_t>(s)] = static_cast<std::size_t>(want);
      remainders[static_cast<std::size_t>(s)] = want - std::floor(want);
      assigned += counts[static_cast<std::size_t>(s)];
    }
    while (assigned < stratum.size()) {
      int best = 0;
      for (int s = 1; s < 3; ++s)
        if (remainders[static_cast<std::size_t>(s)] >
            remainders[static_cast<std::size_t>(best)])
          best = s;
      ++counts[static_cast<std::size_t>(best)];
      remainders[static_cast<std::size_t>(best)] = -1.0;
      ++assigned;
    }
    std::size_t at = 0;
    for (int s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < counts[static_cast<std::size_t>(s)]; ++k) {
        ManifestEntry e = manifest.entries[shuffled[at++]];
        e.split = split_names[s];
        e.pre_path = entry_image_path(e.domain, e.split, e.id, true);
        if (e.post_path) e.post_path = entry_image_path(e.domain, e.split, e.id, false);
        out[static_cast<std::size_t>(s)].entries.push_back(std::move(e));
      }
    }
  }
  // keep original relative order within each split for reproducible files
  for (auto& m : out) {
    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  }
  return out;
}

inline void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  ensure_dir(std::filesystem::path(path).parent_path().string());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest: " + path);
  for (const auto& e : manifest.entries)
    out << entry_to_json(e).dump() << "\n";
  if (!out) throw DataError("manifest write failed: " + path);
}

// Parse only; no image IO or existence checks.
inline DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  DatasetManifest manifest;
  manifest.root = std::filesystem::path(path).parent_path().string();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      manifest.entries.push_back(entry_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("malformed manifest line " + std::to_string(line_no) + " in " +
                      path + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("invalid manifest record at line " + std::to_string(line_no) +
                      " in " + path + ": " + e.what());
    }
  }
  return manifest;
}

// Renders procedural entries and writes PNGs plus the JSONL manifest under
// root. Safe to parallelize: every entry owns distinct files.
inline void materialize(const DatasetManifest& manifest, const DomainSpec& domain,
                        const std::string& root, const std::string& manifest_path) {
  for (const auto& e : manifest.entries) {
    contract_check(e.scene_seed.has_value(),
                   "materialize: entry " + e.id + " lacks scene_seed");
    contract_check(e.domain == domain.name, "materialize: domain mismatch for " + e.id);
  }
  std::filesystem::path root_path(root);
  // one representative entry decides the split directory; entries may span splits
  for (const auto& e : manifest.entries)
    ensure_dir((root_path / e.domain / e.split).string());
  parallel_for(manifest.entries.size(), [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    LabeledPair pair = render_pair(domain, *e.scene_seed, e.label.value_or(0) == 1);
    save_png(pair.pre, (root_path / e.pre_path).string());
    if (e.post_path) save_png(pair.post, (root_path / *e.post_path).string());
  });
  DatasetManifest with_root = manifest;
  with_root.root = root;
  write_manifest(with_root, manifest_path);
}

struct LoadedDataset {
  std::vector<LabeledPair> pairs;
  std::vector<TargetExample> targets;
};

// Full load: parses, checks every referenced file, reads pixels. Entries
// missing both label and post_path come back as target examples.
inline LoadedDataset load_manifest(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DataError("manifest not found: " + path);
  DatasetManifest manifest = read_manifest(path);
  std::filesystem::path root(manifest.root);
  for (const auto& e : manifest.entries) {
    const auto pre_full = root / e.pre_path;
    if (!std::filesystem::exists(pre_full))
      throw DataError("referenced file missing: " + pre_full.string());
    if (e.post_path) {
      const auto post_full = root / *e.post_path;
      if (!std::filesystem::exists(post_full))
        throw DataError("referenced file missing: " + post_full.string());
    }
    if (e.label && !e.post_path && e.provenance != Provenance::synthetic)
      throw DataError("labeled entry without post image: " + e.id);
  }
  LoadedDataset out;
  std::vector<int> kind(manifest.entries.size(), 0);
  std::size_t n_pairs = 0;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    kind[i] = (e.label && e.post_path) ? 1 : 0;
    n_pairs += static_cast<std::size_t>(kind[i]);
  }
  out.pairs.resize(n_pairs);
  out.targets.resize(manifest.entries.size() - n_pairs);
  std::vector<std::size_t> slot(manifest.entries.size());
  std::size_t pair_at = 0, target_at = 0;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    slot[i] = kind[i] ? pair_at++ : target_at++;
  parallel_for(manifest.entries.size(), [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    if (kind[i]) {
      LabeledPair& p = out.pairs[slot[i]];
      p.pre = load_png((root / e.pre_path).string());
      p.post = load_png((root / *e.post_path).string());
      p.label = *e.label;
      p.domain = e.domain;
      p.provenance = e.provenance;
    } else {
      TargetExample& t = out.targets[slot[i]];
      t.pre = load_png((root / e.pre_path).string());
      t.domain = e.domain;
    }
  });
  return out;
}

inline std::vector<DomainSpec> load_domains(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  std::vector<DomainSpec> domains;
  for (const auto& item : j.at("domains")) domains.push_back(item.get<DomainSpec>());
  return domains;
}

}  // namespace damagen::toyworld
