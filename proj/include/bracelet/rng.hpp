// Copyright 2026 The Bracelet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// SplitMix64 with counter-derived substreams. The standard-library engines and
// distributions are implementation-defined, which would break reproducible
// simulation reports; everything random in this project draws from here.

#ifndef BRACELET_RNG_HPP_
#define BRACELET_RNG_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace bracelet {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  // Draws a fresh seed from the OS entropy source.
  static SplitMix64 from_entropy() {
    std::random_device rd;
    std::uint64_t hi = rd();
    std::uint64_t lo = rd();
    return SplitMix64((hi << 32) ^ lo);
  }

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Independent stream for one use site; (seed, site) pairs never share state.
  SplitMix64 substream(std::uint64_t site) const {
    SplitMix64 mix(state_ ^ (site * 0xd1b54a32d192ed03ull));
    return SplitMix64(mix.next());
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Box-Muller; one draw per call keeps the stream position predictable.
  double gaussian(double mean, double sigma) {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double z = std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    return mean + sigma * z;
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> bytes() {
    std::array<std::uint8_t, N> out{};
    std::size_t i = 0;
    while (i < N) {
      std::uint64_t v = next();
      for (int k = 0; k < 8 && i < N; ++k, ++i) {
        out[i] = static_cast<std::uint8_t>(v >> (8 * k));
      }
    }
    return out;
  }

 private:
  std::uint64_t state_;
};

}  // namespace bracelet

#endif  // BRACELET_RNG_HPP_
