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

// Log-distance path-loss regression: fit (tx_power, RSSI, distance) samples,
// invert the model to estimate distance from a received beacon, and flag
// social-distancing violations.

#ifndef BRACELET_DISTANCE_HPP_
#define BRACELET_DISTANCE_HPP_

#include <algorithm>
#include <cmath>
#include <istream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bracelet/error.hpp"

#include "json.hpp"

namespace bracelet {

inline constexpr double kDefaultViolationThresholdM = 2.0;
inline constexpr double kMinEstimatedDistanceM = 0.01;
inline constexpr double kMaxEstimatedDistanceM = 100.0;
inline constexpr double kMinPlausibleExponent = 0.5;
inline constexpr double kMaxPlausibleExponent = 8.0;

struct CalibrationSample {
  double tx_power_dbm = 0.0;
  double rssi_dbm = 0.0;
  double distance_m = 0.0;
};

// PL(d) = pl0 + 10 n log10(d), reference distance 1 m. Lower RSSI means a
// larger estimate; the inverse is clamped to [0.01, 100] m.
struct PathLossModel {
  double exponent_n = 2.0;
  double ref_loss_pl0_db = 40.0;
  double rmse_db = 0.0;

  double path_loss_db(double distance_m) const {
    return ref_loss_pl0_db + 10.0 * exponent_n * std::log10(distance_m);
  }

  double estimate_distance(double tx_power_dbm, double rssi_dbm) const {
    double measured_loss = tx_power_dbm - rssi_dbm;
    double d = std::pow(10.0, (measured_loss - ref_loss_pl0_db) / (10.0 * exponent_n));
    return std::clamp(d, kMinEstimatedDistanceM, kMaxEstimatedDistanceM);
  }
};

inline bool is_violation(double distance_m, double threshold_m) {
  return distance_m < threshold_m;
}

inline PathLossModel fit_path_loss(std::span<const CalibrationSample> samples) {
  for (const auto& s : samples) {
    if (!(s.distance_m > 0.0)) {
      throw Error(ErrorCode::kDegenerateCalibration,
                  "calibration distance must be positive");
    }
  }
  std::set<double> distinct;
  for (const auto& s : samples) distinct.insert(s.distance_m);
  if (samples.size() < 2 || distinct.size() < 2) {
    throw Error(ErrorCode::kDegenerateCalibration,
                "need at least 2 samples at 2 distinct distances");
  }

  // Linear least squares of measured loss against log10(distance).
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double count = static_cast<double>(samples.size());
  for (const auto& s : samples) {
    double x = std::log10(s.distance_m);
    double y = s.tx_power_dbm - s.rssi_dbm;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double denom = count * sxx - sx * sx;
  double slope = (count * sxy - sx * sy) / denom;
  double intercept = (sy - slope * sx) / count;

  PathLossModel model;
  model.exponent_n = slope / 10.0;
  model.ref_loss_pl0_db = intercept;
  if (model.exponent_n <= kMinPlausibleExponent || model.exponent_n >= kMaxPlausibleExponent) {
    std::ostringstream msg;
    msg << "fitted exponent " << model.exponent_n << " outside ("
        << kMinPlausibleExponent << ", " << kMaxPlausibleExponent << ")";
    throw Error(ErrorCode::kImplausibleFit, msg.str());
  }

  double sq = 0.0;
  for (const auto& s : samples) {
    double predicted = model.path_loss_db(s.distance_m);
    double err = (s.tx_power_dbm - s.rssi_dbm) - predicted;
    sq += err * err;
  }
  model.rmse_db = std::sqrt(sq / count);
  return model;
}

// CSV ingestion, header line required: tx_power_dbm,rssi_dbm,distance_m
inline std::vector<CalibrationSample> parse_calibration_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kValidation, "empty calibration file");
  }
  auto strip = [](std::string s) {
    s.erase(std::remove_if(s.begin(), s.end(),
                           [](unsigned char c) { return std::isspace(c); }),
            s.end());
    return s;
  };
  if (strip(line) != "tx_power_dbm,rssi_dbm,distance_m") {
    throw Error(ErrorCode::kValidation,
                "calibration header must be tx_power_dbm,rssi_dbm,distance_m");
  }
  std::vector<CalibrationSample> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    std::istringstream row(line);
    std::string field;
    CalibrationSample s;
    try {
      if (!std::getline(row, field, ',')) throw std::invalid_argument("tx_power_dbm");
      s.tx_power_dbm = std::stod(field);
      if (!std::getline(row, field, ',')) throw std::invalid_argument("rssi_dbm");
      s.rssi_dbm = std::stod(field);
      if (!std::getline(row, field, ',')) throw std::invalid_argument("distance_m");
      s.distance_m = std::stod(field);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kValidation,
                  "bad calibration row at line " + std::to_string(line_no));
    }
    if (!(s.distance_m > 0.0)) {
      throw Error(ErrorCode::kValidation,
                  "non-positive distance at line " + std::to_string(line_no));
    }
    samples.push_back(s);
  }
  return samples;
}

inline nlohmann::ordered_json model_to_json(const PathLossModel& model) {
  return nlohmann::ordered_json{
      {"n", model.exponent_n}, {"pl0_db", model.ref_loss_pl0_db}, {"rmse_db", model.rmse_db}};
}

inline PathLossModel model_from_json(const nlohmann::json& j) {
  PathLossModel model;
  try {
    model.exponent_n = j.at("n").get<double>();
    model.ref_loss_pl0_db = j.at("pl0_db").get<double>();
    model.rmse_db = j.value("rmse_db", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kValidation, std::string("bad model JSON: ") + e.what());
  }
  if (!(model.exponent_n > 0.0)) {
    throw Error(ErrorCode::kValidation, "model exponent must be positive");
  }
  return model;
}

}  // namespace bracelet

#endif  // BRACELET_DISTANCE_HPP_
