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

// Ephemeral identity protocol: epoch arithmetic, hash-derived rotating tags
// and beacon addresses, and the 24-byte beacon wire format.

#ifndef BRACELET_PROTOCOL_HPP_
#define BRACELET_PROTOCOL_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

#include "bracelet/error.hpp"
#include "bracelet/hex.hpp"
#include "bracelet/rng.hpp"
#include "bracelet/sha256.hpp"

namespace bracelet {

inline constexpr std::size_t kTagSize = 16;
inline constexpr std::size_t kAddressSize = 6;
inline constexpr std::size_t kSeedSize = 32;
inline constexpr std::size_t kBeaconFrameSize = 24;
inline constexpr std::uint8_t kBeaconVersion = 1;
inline constexpr double kDefaultEpochLengthS = 900.0;
inline constexpr std::int8_t kDefaultTxPowerDbm = -4;

// Count of epoch_length windows since the shared Unix-epoch origin.
using EpochIndex = std::uint64_t;

struct Tag {
  std::array<std::uint8_t, kTagSize> bytes{};

  auto operator<=>(const Tag&) const = default;

  std::string hex() const { return to_hex(bytes); }
  static Tag from_hex(std::string_view h) { return Tag{from_hex_array<kTagSize>(h)}; }
};

// Tags are hash output, so the leading bytes already make a good map key.
struct TagHash {
  std::size_t operator()(const Tag& t) const {
    std::uint64_t v;
    std::memcpy(&v, t.bytes.data(), sizeof(v));
    return static_cast<std::size_t>(v);
  }
};

struct BeaconAddress {
  std::array<std::uint8_t, kAddressSize> bytes{};

  auto operator<=>(const BeaconAddress&) const = default;

  std::string hex() const { return to_hex(bytes); }
};

// Per-device secret behind tag/address derivation. Never leaves the device:
// it must not appear in any upload, journal line, or wire message.
struct DeviceSeed {
  std::array<std::uint8_t, kSeedSize> bytes{};

  static DeviceSeed generate() {
    auto rng = SplitMix64::from_entropy();
    return DeviceSeed{rng.bytes<kSeedSize>()};
  }

  static DeviceSeed from_rng(SplitMix64& rng) { return DeviceSeed{rng.bytes<kSeedSize>()}; }

  std::string hex() const { return to_hex(bytes); }
  static DeviceSeed from_hex(std::string_view h) {
    return DeviceSeed{from_hex_array<kSeedSize>(h)};
  }
};

inline EpochIndex epoch_of(double timestamp_s, double epoch_length_s) {
  if (!(epoch_length_s > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "epoch length must be positive");
  }
  if (timestamp_s < 0.0) {
    throw Error(ErrorCode::kInvalidConfig, "timestamp must be non-negative");
  }
  return static_cast<EpochIndex>(std::floor(timestamp_s / epoch_length_s));
}

inline double epoch_start_s(EpochIndex epoch, double epoch_length_s) {
  return static_cast<double>(epoch) * epoch_length_s;
}

namespace detail {

// H(domain ‖ seed ‖ epoch_be64); distinct domain constants keep tags and
// addresses unlinkable to each other.
inline Sha256::Digest derive_digest(std::string_view domain, const DeviceSeed& seed,
                                    EpochIndex epoch) {
  Sha256 h;
  h.update(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(domain.data()), domain.size()));
  h.update(seed.bytes);
  std::array<std::uint8_t, 8> epoch_be{};
  for (int i = 0; i < 8; ++i) {
    epoch_be[i] = static_cast<std::uint8_t>(epoch >> (56 - 8 * i));
  }
  h.update(epoch_be);
  return h.finish();
}

}  // namespace detail

inline Tag derive_tag(const DeviceSeed& seed, EpochIndex epoch) {
  auto digest = detail::derive_digest("tag:v1", seed, epoch);
  Tag tag;
  std::copy(digest.begin(), digest.begin() + kTagSize, tag.bytes.begin());
  return tag;
}

inline BeaconAddress derive_address(const DeviceSeed& seed, EpochIndex epoch) {
  auto digest = detail::derive_digest("addr:v1", seed, epoch);
  BeaconAddress addr;
  std::copy(digest.begin(), digest.begin() + kAddressSize, addr.bytes.begin());
  return addr;
}

// One advertising frame: version(1) ‖ address(6) ‖ tx_power(1, two's
// complement) ‖ tag(16), 24 bytes total.
struct Beacon {
  std::uint8_t version = kBeaconVersion;
  Tag tag;
  std::int8_t tx_power_dbm = kDefaultTxPowerDbm;
  BeaconAddress address;

  auto operator<=>(const Beacon&) const = default;
};

using BeaconFrame = std::array<std::uint8_t, kBeaconFrameSize>;

inline BeaconFrame encode_beacon(const Beacon& beacon) {
  BeaconFrame frame{};
  frame[0] = beacon.version;
  std::copy(beacon.address.bytes.begin(), beacon.address.bytes.end(), frame.begin() + 1);
  frame[7] = static_cast<std::uint8_t>(beacon.tx_power_dbm);
  std::copy(beacon.tag.bytes.begin(), beacon.tag.bytes.end(), frame.begin() + 8);
  return frame;
}

inline Beacon decode_beacon(std::span<const std::uint8_t> frame) {
  if (frame.size() != kBeaconFrameSize) {
    throw Error(ErrorCode::kMalformedFrame,
                "beacon frame must be " + std::to_string(kBeaconFrameSize) +
                    " bytes, got " + std::to_string(frame.size()));
  }
  if (frame[0] != kBeaconVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "beacon version " + std::to_string(frame[0]));
  }
  Beacon beacon;
  beacon.version = frame[0];
  std::copy(frame.begin() + 1, frame.begin() + 7, beacon.address.bytes.begin());
  beacon.tx_power_dbm = static_cast<std::int8_t>(frame[7]);
  std::copy(frame.begin() + 8, frame.end(), beacon.tag.bytes.begin());
  return beacon;
}

}  // namespace bracelet

#endif  // BRACELET_PROTOCOL_HPP_
