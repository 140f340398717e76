/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>

#include <boost/random/normal_distribution.hpp>

namespace sdews {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kW32A;
      key[1] += kW32B;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kW32A = 0x9E3779B9;
  static constexpr std::uint32_t kW32B = 0xBB67AE85;
  static constexpr std::uint32_t kM4x32A = 0xD2511F53;
  static constexpr std::uint32_t kM4x32B = 0xCD9E8D57;

  static Counter single_round(const Counter& ctr, const Key& key) {
    const std::uint64_t p0 = std::uint64_t{kM4x32A} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM4x32B} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
};

/// Per-trajectory random stream. The 256-bit xoshiro state is derived with
/// Philox from (master seed, stream index), so every stream is a pure
/// function of those two numbers and independent of scheduling.
class RandomStream {
 public:
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  RandomStream(std::uint64_t seed, std::uint64_t stream);

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal (ziggurat from Boost.Random).
  double normal() { return boost::random::normal_distribution<double>()(*this); }

  // +1 or -1 with probability 1/2 each.
  double rademacher() {
    return (next_u64() >> 63) != 0 ? 1.0 : -1.0;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
};

enum class NoiseKind { kGaussian, kRademacher };

/// Increments xi with E xi = 0, E xi^2 = 1, E xi^3 = 0 per component.
class NoiseGenerator {
 public:
  NoiseGenerator(NoiseKind kind, std::uint64_t seed, std::uint64_t trajectory)
      : kind_(kind), stream_(seed, trajectory) {}

  NoiseKind kind() const { return kind_; }
  RandomStream& stream() { return stream_; }

  void sample(std::span<double> out) {
    if (kind_ == NoiseKind::kGaussian) {
      for (double& v : out) v = stream_.normal();
    } else {
      for (double& v : out) v = stream_.rademacher();
    }
  }
  double uniform() { return stream_.uniform(); }

 private:
  NoiseKind kind_;
  RandomStream stream_;
};

/// Deterministic 64-bit mixing of two words (used to derive row seeds).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace sdews
