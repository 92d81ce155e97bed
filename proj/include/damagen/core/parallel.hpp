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

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace damagen {

inline unsigned worker_count() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1u : n;
}

// Runs fn(i) for i in [0, n). Work items must be independent; scheduling
// order is unspecified, so any shared accumulation must be per-item.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = worker_count();
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned used = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  pool.reserve(used - 1);
  for (unsigned t = 1; t < used; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Fixed shard boundaries independent of the worker count, so that reductions
// done in shard order are reproducible on any machine.
struct Shard {
  std::size_t begin;
  std::size_t end;
};

inline std::vector<Shard> fixed_shards(std::size_t n, std::size_t shard_count = 16) {
  std::vector<Shard> shards;
  if (n == 0) return shards;
  shard_count = std::min(shard_count, n);
  const std::size_t base = n / shard_count;
  const std::size_t extra = n % shard_count;
  std::size_t at = 0;
  for (std::size_t s = 0; s < shard_count; ++s) {
    std::size_t len = base + (s < extra ? 1 : 0);
    shards.push_back({at, at + len});
    at += len;
  }
  return shards;
}

}  // namespace damagen
