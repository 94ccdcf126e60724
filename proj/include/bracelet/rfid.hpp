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

// The byte payload a wearer's RFID tag stores and a reader checks:
//   magic "RB"(2) ‖ version(1) ‖ risk(1) ‖ issued_epoch(4, big-endian) ‖ crc8(1)
// CRC-8 poly 0x07, init 0x00, over the preceding 8 bytes.

#ifndef BRACELET_RFID_HPP_
#define BRACELET_RFID_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "bracelet/error.hpp"
#include "bracelet/risk.hpp"

namespace bracelet {

inline constexpr std::size_t kRiskPayloadSize = 9;
inline constexpr std::uint8_t kRiskPayloadVersion = 1;
inline constexpr std::array<std::uint8_t, 2> kRiskPayloadMagic{0x52, 0x42};  // "RB"

using RiskPayload = std::array<std::uint8_t, kRiskPayloadSize>;

inline std::uint8_t crc8(std::span<const std::uint8_t> data) {
  std::uint8_t crc = 0x00;
  for (std::uint8_t byte : data) {
    crc ^= byte;
    for (int bit = 0; bit < 8; ++bit) {
      crc = (crc & 0x80) ? static_cast<std::uint8_t>((crc << 1) ^ 0x07)
                         : static_cast<std::uint8_t>(crc << 1);
    }
  }
  return crc;
}

inline RiskPayload encode_risk(RiskLevel risk, std::uint32_t issued_epoch) {
  RiskPayload payload{};
  payload[0] = kRiskPayloadMagic[0];
  payload[1] = kRiskPayloadMagic[1];
  payload[2] = kRiskPayloadVersion;
  payload[3] = static_cast<std::uint8_t>(risk);
  payload[4] = static_cast<std::uint8_t>(issued_epoch >> 24);
  payload[5] = static_cast<std::uint8_t>(issued_epoch >> 16);
  payload[6] = static_cast<std::uint8_t>(issued_epoch >> 8);
  payload[7] = static_cast<std::uint8_t>(issued_epoch);
  payload[8] = crc8(std::span<const std::uint8_t>(payload.data(), 8));
  return payload;
}

struct DecodedRisk {
  RiskLevel risk = RiskLevel::kNoRisk;
  std::uint32_t issued_epoch = 0;
};

inline DecodedRisk decode_risk(std::span<const std::uint8_t> payload) {
  if (payload.size() != kRiskPayloadSize) {
    throw Error(ErrorCode::kMalformedPayload,
                "payload must be " + std::to_string(kRiskPayloadSize) +
                    " bytes, got " + std::to_string(payload.size()));
  }
  if (payload[0] != kRiskPayloadMagic[0] || payload[1] != kRiskPayloadMagic[1]) {
    throw Error(ErrorCode::kMalformedPayload, "bad magic");
  }
  if (payload[2] != kRiskPayloadVersion) {
    throw Error(ErrorCode::kMalformedPayload,
                "unsupported payload version " + std::to_string(payload[2]));
  }
  if (crc8(payload.first(8)) != payload[8]) {
    throw Error(ErrorCode::kCorruptPayload, "crc mismatch");
  }
  DecodedRisk decoded;
  decoded.risk = risk_level_from_value(payload[3]);
  decoded.issued_epoch = (static_cast<std::uint32_t>(payload[4]) << 24) |
                         (static_cast<std::uint32_t>(payload[5]) << 16) |
                         (static_cast<std::uint32_t>(payload[6]) << 8) |
                         static_cast<std::uint32_t>(payload[7]);
  return decoded;
}

struct AccessPolicy {
  RiskLevel max_admitted_risk = RiskLevel::kLowRisk;
  std::uint32_t max_age_epochs = 96;  // 24 h of 15-minute epochs
};

enum class DenyReason : std::uint8_t {
  kNone = 0,
  kRisk,
  kStale,
};

struct AccessDecision {
  bool granted = false;
  DenyReason reason = DenyReason::kNone;
};

inline AccessDecision access_decision(const DecodedRisk& decoded, std::uint64_t now_epoch,
                                      const AccessPolicy& policy = {}) {
  if (now_epoch < decoded.issued_epoch) {
    throw Error(ErrorCode::kClockInconsistency,
                "payload issued in the future (epoch " +
                    std::to_string(decoded.issued_epoch) + " > now " +
                    std::to_string(now_epoch) + ")");
  }
  if (now_epoch - decoded.issued_epoch > policy.max_age_epochs) {
    return AccessDecision{false, DenyReason::kStale};
  }
  if (static_cast<std::uint8_t>(decoded.risk) <=
      static_cast<std::uint8_t>(policy.max_admitted_risk)) {
    return AccessDecision{true, DenyReason::kNone};
  }
  return AccessDecision{false, DenyReason::kRisk};
}

}  // namespace bracelet

#endif  // BRACELET_RFID_HPP_
