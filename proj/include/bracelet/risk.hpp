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

#ifndef BRACELET_RISK_HPP_
#define BRACELET_RISK_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "bracelet/error.hpp"

namespace bracelet {

enum class RiskLevel : std::uint8_t {
  kNoRisk = 0,
  kLowRisk = 1,
  kHighRisk = 2,
};

// High: abnormal symptoms, or infected contact combined with excessive
// violations. Low: either of the latter two alone. No risk otherwise.
inline RiskLevel classify_risk(bool symptoms_abnormal, bool infected_contact,
                               bool excessive_violations) {
  if (symptoms_abnormal || (infected_contact && excessive_violations)) {
    return RiskLevel::kHighRisk;
  }
  if (infected_contact || excessive_violations) {
    return RiskLevel::kLowRisk;
  }
  return RiskLevel::kNoRisk;
}

inline const char* risk_level_name(RiskLevel level) {
  switch (level) {
    case RiskLevel::kNoRisk: return "no_risk";
    case RiskLevel::kLowRisk: return "low_risk";
    case RiskLevel::kHighRisk: return "high_risk";
  }
  return "unknown";
}

inline RiskLevel risk_level_from_value(std::uint8_t value) {
  if (value > 2) {
    throw Error(ErrorCode::kInvalidRisk,
                "risk byte " + std::to_string(value) + " has no meaning");
  }
  return static_cast<RiskLevel>(value);
}

inline RiskLevel risk_level_from_name(std::string_view name) {
  if (name == "no_risk" || name == "no" || name == "0") return RiskLevel::kNoRisk;
  if (name == "low_risk" || name == "low" || name == "1") return RiskLevel::kLowRisk;
  if (name == "high_risk" || name == "high" || name == "2") return RiskLevel::kHighRisk;
  throw Error(ErrorCode::kInvalidRisk, "unknown risk level: " + std::string(name));
}

}  // namespace bracelet

#endif  // BRACELET_RISK_HPP_
