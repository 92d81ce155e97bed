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
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "damagen/core/errors.hpp"
#include "damagen/core/nn.hpp"

namespace damagen {

// Flat binary tensor archive. Values only; optimizer moments are not
// persisted. Round-trips bit-exactly.
namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("tensor archive truncated");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw DataError("tensor archive truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace detail

template <typename S>
inline void save_tensors(const nn::TensorList<S>& tensors, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write("DMGN", 4);
  detail::write_u32(out, 1);
  detail::write_u32(out, static_cast<std::uint32_t>(sizeof(S)));
  detail::write_u64(out, tensors.size());
  for (const auto* t : tensors) {
    detail::write_u32(out, static_cast<std::uint32_t>(t->name.size()));
    out.write(t->name.data(), static_cast<std::streamsize>(t->name.size()));
    detail::write_u64(out, static_cast<std::uint64_t>(t->value.rows()));
    detail::write_u64(out, static_cast<std::uint64_t>(t->value.cols()));
    out.write(reinterpret_cast<const char*>(t->value.data()),
              static_cast<std::streamsize>(sizeof(S) * t->value.size()));
  }
  if (!out) throw DataError("checkpoint write failed: " + path);
}

template <typename S>
inline void load_tensors(const nn::TensorList<S>& tensors, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "DMGN")
    throw DataError("not a tensor archive: " + path);
  const std::uint32_t version = detail::read_u32(in);
  if (version != 1) throw DataError("unsupported archive version in " + path);
  const std::uint32_t ssize = detail::read_u32(in);
  if (ssize != sizeof(S)) throw DataError("scalar width mismatch in " + path);
  const std::uint64_t count = detail::read_u64(in);
  if (count != tensors.size())
    throw DataError("tensor count mismatch in " + path + ": archive has " +
                    std::to_string(count) + ", model expects " +
                    std::to_string(tensors.size()));
  for (auto* t : tensors) {
    const std::uint32_t name_len = detail::read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (name != t->name)
      throw DataError("tensor name mismatch in " + path + ": archive has '" + name +
                      "', model expects '" + t->name + "'");
    const auto rows = static_cast<Eigen::Index>(detail::read_u64(in));
    const auto cols = static_cast<Eigen::Index>(detail::read_u64(in));
    if (rows != t->value.rows() || cols != t->value.cols())
      throw DataError("tensor shape mismatch for '" + name + "' in " + path);
    in.read(reinterpret_cast<char*>(t->value.data()),
            static_cast<std::streamsize>(sizeof(S) * t->value.size()));
    if (!in) throw DataError("tensor archive truncated: " + path);
  }
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write: " + path);
  out << j.dump(2) << "\n";
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

}  // namespace damagen
