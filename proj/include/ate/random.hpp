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
#ifndef ATE_RANDOM_HPP
#define ATE_RANDOM_HPP

// Counter-based random streams. Every draw is a pure function of
// (seed, domain, stream, substream, draw index), so parallel work can be
// split arbitrarily without changing results.
//
// Generator: Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy
// as 1, 2, 3", SC 2011).

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include <boost/random/normal_distribution.hpp>

namespace ate {

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline PhiloxBlock philox4x32_10(PhiloxBlock ctr, PhiloxKey key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Draw domains keep streams used for different purposes disjoint.
enum class StreamDomain : std::uint32_t {
  kGenerate = 1,
  kBootstrap = 2,
};

/// A sequential view of one counter-based stream. Cheap to construct; holds no
/// shared state.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, StreamDomain domain, std::uint32_t stream,
                std::uint32_t substream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream),
        substream_(substream),
        domain_(static_cast<std::uint32_t>(domain)) {}

  /// Next 128 random bits.
  PhiloxBlock next_block() {
    return philox4x32_10({counter_++, stream_, substream_, domain_}, key_);
  }

  /// Two uniforms in the open interval (0, 1), 53 bits each.
  std::array<double, 2> uniform_pair() {
    const PhiloxBlock b = next_block();
    return {to_open_unit(b[0], b[1]), to_open_unit(b[2], b[3])};
  }

  double uniform() { return uniform_pair()[0]; }

  /// Two independent standard normals (Box-Muller).
  std::array<double, 2> normal_pair() {
    const auto [u1, u2] = uniform_pair();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(angle), r * std::sin(angle)};
  }

  double normal() { return normal_pair()[0]; }

 private:
  static double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(hi >> 5) << 26) | static_cast<std::uint64_t>(lo >> 6);
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  PhiloxKey key_;
  std::uint32_t counter_ = 0;
  std::uint32_t stream_;
  std::uint32_t substream_;
  std::uint32_t domain_;
};

/// Bits owned by a single unit: block j of unit `unit` is the Philox output at
/// counter {unit, stream, substream, domain | j << 8}. Satisfies the standard
/// uniform random bit generator requirements, so library distributions can
/// consume a variable number of words without touching other units' draws.
class UnitStream {
 public:
  using result_type = std::uint32_t;

  UnitStream(std::uint64_t seed, StreamDomain domain, std::uint32_t stream, std::uint32_t substream,
             std::uint32_t unit)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        unit_(unit),
        stream_(stream),
        substream_(substream),
        domain_(static_cast<std::uint32_t>(domain)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xFFFFFFFFu; }

  result_type operator()() {
    if (pos_ == 4) {
      block_ = philox4x32_10({unit_, stream_, substream_, domain_ | (next_block_++ << 8)}, key_);
      pos_ = 0;
    }
    return block_[pos_++];
  }

  /// Two independent standard normals (ziggurat, via Boost.Random).
  std::array<double, 2> normal_pair() {
    boost::random::normal_distribution<double> z;
    const double a = z(*this);
    const double b = z(*this);
    return {a, b};
  }

 private:
  PhiloxKey key_;
  std::uint32_t unit_;
  std::uint32_t stream_;
  std::uint32_t substream_;
  std::uint32_t domain_;
  std::uint32_t next_block_ = 0;
  PhiloxBlock block_{};
  int pos_ = 4;
};

}  // namespace ate

#endif  // ATE_RANDOM_HPP
