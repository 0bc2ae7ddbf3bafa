/*
 * Copyright (c) 2026 the dmfdyn authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <string_view>

namespace dmf {

/// Splittable counter-based PRNG (splitmix64 core). Streams derived from a
/// base seed with derive_seed() are statistically independent, so every
/// stochastic operation in the library takes an explicit seed and Monte-Carlo
/// trials can be regenerated in isolation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform();

  /// Standard normal via Box-Muller; pairs are cached.
  double gaussian();

  /// Unbiased uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n);

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Derives an independent substream seed from (base, salt).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

/// Tagged variant for named substreams ("mask", "noise", ...).
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

/// FNV-1a 64-bit hash, used to fold strings into seed material.
std::uint64_t hash64(std::string_view s);

/// Bit pattern of a double, for hashing real-valued config knobs.
std::uint64_t double_bits(double x);

}  // namespace dmf
