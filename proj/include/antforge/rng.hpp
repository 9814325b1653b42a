// Copyright 2026 The antforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace antforge {

// Philox4x32-10 block function (Salmon et al., Random123). Pure: the same
// (counter, key) always produces the same four words.
std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> counter,
                                   std::array<uint32_t, 2> key);

uint64_t splitmix64(uint64_t x);

// 64-bit FNV-1a, used for stream names and architecture fingerprints.
uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ULL);

// Counter-based random stream. The seed is the Philox key, the stream id and
// draw index make up the counter, so draw i of (seed, stream) is a pure
// function of those three numbers. Each draw consumes one 128-bit block.
class Rng {
 public:
  Rng() = default;
  explicit Rng(uint64_t seed, uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  // Stream derived from a name, e.g. Rng::named(seed, "init").
  static Rng named(uint64_t seed, std::string_view name);

  // Independent child stream; the parent's position is untouched.
  Rng split(uint64_t child) const;
  Rng split(std::string_view name) const;

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }
  uint64_t position() const { return position_; }
  void seek(uint64_t position) { position_ = position; }

  std::array<uint32_t, 4> block(uint64_t index) const;

  // Uniform in the open interval (0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller on a single block.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  uint64_t next_u64();
  // Unbiased integer in [0, n).
  uint64_t below(uint64_t n);
  // Poisson(lambda) by CDF inversion; lambda is expected to be modest (< 1e3).
  int64_t poisson(double lambda);

 private:
  uint64_t seed_ = 0;
  uint64_t stream_ = 0;
  uint64_t position_ = 0;
};

// Pure helpers for the per-index draw used by corruption kernels.
double uniform_at(const Rng& rng, uint64_t index);
double normal_at(const Rng& rng, uint64_t index);

}  // namespace antforge
