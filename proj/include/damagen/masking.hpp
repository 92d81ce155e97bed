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

#include <cstdint>
#include <cstdlib>
#include <vector>

#include "damagen/core/errors.hpp"
#include "damagen/core/rng.hpp"
#include "damagen/vqcodec.hpp"

// Edit-region masks: a single all-ones patch perturbed around the image
// center, and its max-pool downsampling to token resolution.

namespace damagen::masking {

struct Perturbation {
  int delta_y = 0;  // in [-H/16, H/16]
  int delta_x = 0;  // in [-W/16, W/16]
};

struct EditMask {
  int height = 0, width = 0;        // image resolution
  int patch_height = 0, patch_width = 0;
  int center_row = 0, center_col = 0;
  std::vector<std::uint8_t> grid;   // height * width, 1 = editable

  std::uint8_t at(int r, int c) const {
    return grid[static_cast<std::size_t>(r) * width + c];
  }
  std::size_t popcount() const {
    std::size_t n = 0;
    for (auto v : grid) n += v;
    return n;
  }
};

struct TokenMask {
  int rows = 0, cols = 0;
  int factor = 0;
  std::vector<std::uint8_t> grid;  // rows * cols, 1 = regenerate

  std::uint8_t at(int r, int c) const {
    return grid[static_cast<std::size_t>(r) * cols + c];
  }
  std::size_t popcount() const {
    std::size_t n = 0;
    for (auto v : grid) n += v;
    return n;
  }
};

inline EditMask make_mask(int height, int width, int patch_h, int patch_w,
                          const Perturbation& d) {
  contract_check(std::abs(d.delta_y) <= height / 16 && std::abs(d.delta_x) <= width / 16,
                 "make_mask: perturbation out of range");
  EditMask mask;
  mask.height = height;
  mask.width = width;
  mask.patch_height = patch_h;
  mask.patch_width = patch_w;
  mask.center_row = height / 2 + d.delta_y;
  mask.center_col = width / 2 + d.delta_x;
  mask.grid.assign(static_cast<std::size_t>(height) * width, 0);
  const int top = mask.center_row - patch_h / 2;
  const int left = mask.center_col - patch_w / 2;
  contract_check(top >= 0 && left >= 0 && top + patch_h <= height && left + patch_w <= width,
                 "make_mask: patch out of bounds");
  for (int r = top; r < top + patch_h; ++r)
    for (int c = left; c < left + patch_w; ++c)
      mask.grid[static_cast<std::size_t>(r) * width + c] = 1;
  return mask;
}

// Patch of H' x W' ones centered at (H/2 + dy, W/2 + dx) with dy, dx drawn
// uniformly over the integer ranges [-H/16, H/16] and [-W/16, W/16]. The
// preconditions H' <= H/2, W' <= W/2 guarantee the patch stays in bounds for
// every legal perturbation.
inline EditMask sample_mask(int height, int width, int patch_h, int patch_w, Rng& rng) {
  config_check(height % 16 == 0 && width % 16 == 0,
               "sample_mask: H and W must be divisible by 16");
  config_check(patch_h > 0 && patch_w > 0, "sample_mask: patch must be nonempty");
  config_check(patch_h <= height / 2 && patch_w <= width / 2,
               "sample_mask: patch larger than H/2 x W/2 can overflow the image");
  Perturbation d;
  d.delta_y = static_cast<int>(rng.uniform_int(-height / 16, height / 16));
  d.delta_x = static_cast<int>(rng.uniform_int(-width / 16, width / 16));
  return make_mask(height, width, patch_h, patch_w, d);
}

// Max-pool rule: a token is regenerated iff its f x f pixel block touches any
// edit pixel.
inline TokenMask downsample_mask(const EditMask& mask, int factor) {
  config_check(factor > 0 && mask.height % factor == 0 && mask.width % factor == 0,
               "downsample_mask: factor must divide mask dimensions");
  TokenMask tm;
  tm.rows = mask.height / factor;
  tm.cols = mask.width / factor;
  tm.factor = factor;
  tm.grid.assign(static_cast<std::size_t>(tm.rows) * tm.cols, 0);
  for (int i = 0; i < tm.rows; ++i) {
    for (int j = 0; j < tm.cols; ++j) {
      std::uint8_t any = 0;
      for (int r = i * factor; r < (i + 1) * factor && !any; ++r)
        for (int c = j * factor; c < (j + 1) * factor; ++c)
          if (mask.at(r, c)) {
            any = 1;
            break;
          }
      tm.grid[static_cast<std::size_t>(i) * tm.cols + j] = any;
    }
  }
  return tm;
}

// Masked positions take the reserved MASK id; everything else is untouched.
inline vqcodec::TokenGrid apply_mask(const vqcodec::TokenGrid& tokens,
                                     const TokenMask& token_mask, int mask_id) {
  contract_check(tokens.rows == token_mask.rows && tokens.cols == token_mask.cols,
                 "apply_mask: grid shape mismatch");
  vqcodec::TokenGrid out = tokens;
  for (std::size_t i = 0; i < out.ids.size(); ++i)
    if (token_mask.grid[i]) out.ids[i] = mask_id;
  return out;
}

}  // namespace damagen::masking
