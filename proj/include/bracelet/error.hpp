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

#ifndef BRACELET_ERROR_HPP_
#define BRACELET_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace bracelet {

// Every failure the library reports, one code per contract-level error.
enum class ErrorCode {
  kInvalidConfig,
  kMalformedFrame,
  kUnsupportedVersion,
  kDegenerateCalibration,
  kImplausibleFit,
  kRejectedSample,
  kConsentDenied,
  kNothingToUpload,
  kDuplicateUpload,
  kMalformedRequest,
  kOversizeRequest,
  kMalformedPayload,
  kCorruptPayload,
  kInvalidRisk,
  kClockInconsistency,
  kValidation,
  kIo,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "invalid-configuration";
    case ErrorCode::kMalformedFrame: return "malformed-frame";
    case ErrorCode::kUnsupportedVersion: return "unsupported-version";
    case ErrorCode::kDegenerateCalibration: return "degenerate-calibration";
    case ErrorCode::kImplausibleFit: return "implausible-fit";
    case ErrorCode::kRejectedSample: return "rejected-sample";
    case ErrorCode::kConsentDenied: return "consent-denied";
    case ErrorCode::kNothingToUpload: return "nothing-to-upload";
    case ErrorCode::kDuplicateUpload: return "duplicate-upload";
    case ErrorCode::kMalformedRequest: return "malformed-request";
    case ErrorCode::kOversizeRequest: return "oversize-request";
    case ErrorCode::kMalformedPayload: return "malformed-payload";
    case ErrorCode::kCorruptPayload: return "corrupt-payload";
    case ErrorCode::kInvalidRisk: return "invalid-risk";
    case ErrorCode::kClockInconsistency: return "clock-inconsistency";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bracelet

#endif  // BRACELET_ERROR_HPP_
