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

#include "antforge/rng.hpp"

#include <cmath>
#include <numbers>

namespace antforge {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  const uint64_t p = static_cast<uint64_t>(a) * b;
  hi = static_cast<uint32_t>(p >> 32);
  lo = static_cast<uint32_t>(p);
}

inline double to_open_unit(uint32_t a, uint32_t b) {
  const uint64_t bits = (static_cast<uint64_t>(a >> 5) << 26) | (b >> 6);
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double box_muller(const std::array<uint32_t, 4>& w) {
  const double u1 = to_open_unit(w[0], w[1]);
  const double u2 = to_open_unit(w[2], w[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

uint64_t fnv1a64(std::string_view bytes, uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng Rng::named(uint64_t seed, std::string_view name) { return Rng(seed, fnv1a64(name)); }

Rng Rng::split(uint64_t child) const {
  return Rng(seed_, splitmix64(stream_ ^ splitmix64(child + 0x632BE59BD9B4E019ULL)));
}

Rng Rng::split(std::string_view name) const { return split(fnv1a64(name)); }

std::array<uint32_t, 4> Rng::block(uint64_t index) const {
  return philox4x32({static_cast<uint32_t>(index), static_cast<uint32_t>(index >> 32),
                     static_cast<uint32_t>(stream_), static_cast<uint32_t>(stream_ >> 32)},
                    {static_cast<uint32_t>(seed_), static_cast<uint32_t>(seed_ >> 32)});
}

double Rng::uniform() {
  const auto w = block(position_++);
  return to_open_unit(w[0], w[1]);
}

double Rng::normal() { return box_muller(block(position_++)); }

uint64_t Rng::next_u64() {
  const auto w = block(position_++);
  return (static_cast<uint64_t>(w[0]) << 32) | w[1];
}

uint64_t Rng::below(uint64_t n) {
  if (n <= 1) return 0;
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  for (;;) {
    const uint64_t r = next_u64();
    if (r < limit) return r % n;
  }
}

int64_t Rng::poisson(double lambda) {
  if (lambda <= 0.0) return 0;
  const double u = uniform();
  // Sequential search on the CDF, one uniform per draw.
  double p = std::exp(-lambda);
  double cdf = p;
  int64_t k = 0;
  const int64_t cap = static_cast<int64_t>(lambda + 40.0 * std::sqrt(lambda) + 100.0);
  while (u > cdf && k < cap) {
    ++k;
    p *= lambda / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

double uniform_at(const Rng& rng, uint64_t index) {
  const auto w = rng.block(index);
  return to_open_unit(w[0], w[1]);
}

double normal_at(const Rng& rng, uint64_t index) { return box_muller(rng.block(index)); }

}  // namespace antforge
