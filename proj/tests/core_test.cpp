// Copyright 2026 The Damagen Authors.
// Licensed under the Apache License, Version 2.0. See the LICENSE file.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <numeric>
#include <vector>

#include "damagen/core/hash.hpp"
#include "damagen/core/image.hpp"
#include "damagen/core/nn.hpp"
#include "damagen/core/parallel.hpp"
#include "damagen/core/rng.hpp"
#include "damagen/core/serialize.hpp"

using namespace damagen;

namespace {

std::string temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("damagen_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("rng: identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.u64() == b.u64());
  }
  Rng c(42), d(43);
  bool all_equal = true;
  for (int i = 0; i < 20; ++i) all_equal = all_equal && (c.u64() == d.u64());
  CHECK_FALSE(all_equal);
}

TEST_CASE("rng: uniform_int covers the closed range uniformly") {
  Rng rng(7);
  std::vector<int> counts(9, 0);
  const int draws = 90000;
  for (int i = 0; i < draws; ++i) {
    const auto v = rng.uniform_int(-4, 4);
    REQUIRE(v >= -4);
    REQUIRE(v <= 4);
    ++counts[static_cast<std::size_t>(v + 4)];
  }
  for (int c : counts) {
    const double f = static_cast<double>(c) / draws;
    CHECK(f == doctest::Approx(1.0 / 9).epsilon(0.05));
  }
}

TEST_CASE("rng: normal has roughly unit moments") {
  Rng rng(11);
  double sum = 0, sq = 0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("rng: permutation is a permutation and seed-stable") {
  Rng a(5), b(5);
  auto p1 = a.permutation(100);
  auto p2 = b.permutation(100);
  CHECK(p1 == p2);
  std::vector<std::size_t> sorted = p1;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
}

TEST_CASE("derive_seed separates stages and indices") {
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
}

TEST_CASE("png round trip is lossless") {
  Rng rng(3);
  Image img(32, 48);
  for (auto& px : img.data) px = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  const auto dir = temp_dir("png");
  const auto path = dir + "/img.png";
  save_png(img, path);
  Image back = load_png(path);
  CHECK(back == img);
  std::filesystem::remove_all(dir);
}

TEST_CASE("png load of a missing file names the path") {
  CHECK_THROWS_WITH_AS(load_png("/nonexistent/nope.png"),
                       doctest::Contains("/nonexistent/nope.png"), DataError);
}

TEST_CASE("tensor archive round trips byte-exactly") {
  Rng rng(9);
  nn::Tensor<float> a, b;
  a.init("alpha", 7, 5, nn::kBackbone);
  b.init("beta", 3, 1, nn::kHead);
  nn::normal_init(a.value, rng, 1.0);
  nn::normal_init(b.value, rng, 2.0);
  const auto dir = temp_dir("archive");
  save_tensors<float>({&a, &b}, dir + "/t.bin");

  nn::Tensor<float> a2, b2;
  a2.init("alpha", 7, 5, nn::kBackbone);
  b2.init("beta", 3, 1, nn::kHead);
  load_tensors<float>({&a2, &b2}, dir + "/t.bin");
  CHECK(a2.value == a.value);
  CHECK(b2.value == b.value);

  nn::Tensor<float> wrong;
  wrong.init("gamma", 7, 5, nn::kBackbone);
  nn::Tensor<float> b3;
  b3.init("beta", 3, 1, nn::kHead);
  CHECK_THROWS_AS((load_tensors<float>({&wrong, &b3}, dir + "/t.bin")), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("file hash is content-stable") {
  const auto dir = temp_dir("hash");
  {
    std::ofstream out(dir + "/x", std::ios::binary);
    out << "hello";
  }
  const auto h1 = hash_file(dir + "/x");
  {
    std::ofstream out(dir + "/y", std::ios::binary);
    out << "hello";
  }
  CHECK(h1 == hash_file(dir + "/y"));
  {
    std::ofstream out(dir + "/z", std::ios::binary);
    out << "hellp";
  }
  CHECK(h1 != hash_file(dir + "/z"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("parallel_for covers every index exactly once") {
  std::vector<int> hits(977, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::accumulate(hits.begin(), hits.end(), 0) == 977);
  CHECK(*std::min_element(hits.begin(), hits.end()) == 1);
}

TEST_CASE("fixed shards partition the range independent of worker count") {
  auto shards = fixed_shards(103, 16);
  std::size_t at = 0;
  for (const auto& s : shards) {
    CHECK(s.begin == at);
    at = s.end;
  }
  CHECK(at == 103);
}
