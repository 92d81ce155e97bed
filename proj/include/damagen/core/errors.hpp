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

#include <stdexcept>
#include <string>

namespace damagen {

// Violated call contract (bad shapes, out-of-range ids, broken preconditions).
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid or inconsistent configuration supplied by the operator.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Missing or malformed data on disk (manifests, images, checkpoints).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values or divergence detected in a numeric procedure.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// A metric that is mathematically undefined for the given inputs.
class MetricError : public ContractError {
 public:
  explicit MetricError(const std::string& what) : ContractError(what) {}
};

inline void contract_check(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

inline void config_check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace damagen
