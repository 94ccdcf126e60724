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

// Simulation scenario schema: fleet, trajectories, channel, injected events.
// See schemas/scenario.schema.json for the file format.

#ifndef BRACELET_SCENARIO_HPP_
#define BRACELET_SCENARIO_HPP_

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bracelet/device.hpp"
#include "bracelet/error.hpp"

#include "json.hpp"

namespace bracelet {

struct ChannelModel {
  double exponent_n = 2.0;
  double pl0_db = 40.0;
  double shadowing_sigma_db = 0.0;
  double reception_floor_dbm = -95.0;
};

struct Waypoint {
  double t_s = 0.0;
  double x_m = 0.0;
  double y_m = 0.0;
};

struct AgentSpec {
  std::string id;
  std::vector<Waypoint> trajectory;
  std::vector<SensorSample> sensor_events;
  std::optional<double> infected_from_s;
  bool consent = true;

  // Piecewise-linear position; clamped to the trajectory's endpoints.
  std::pair<double, double> position_at(double t_s) const {
    const auto& w = trajectory;
    if (t_s <= w.front().t_s) return {w.front().x_m, w.front().y_m};
    if (t_s >= w.back().t_s) return {w.back().x_m, w.back().y_m};
    for (std::size_t i = 1; i < w.size(); ++i) {
      if (t_s <= w[i].t_s) {
        double f = (t_s - w[i - 1].t_s) / (w[i].t_s - w[i - 1].t_s);
        return {w[i - 1].x_m + f * (w[i].x_m - w[i - 1].x_m),
                w[i - 1].y_m + f * (w[i].y_m - w[i - 1].y_m)};
      }
    }
    return {w.back().x_m, w.back().y_m};
  }
};

enum class MatchingMode { kLocal, kCloud };

inline const char* matching_mode_name(MatchingMode mode) {
  return mode == MatchingMode::kLocal ? "local" : "cloud";
}

struct Scenario {
  std::uint64_t seed = 0;
  double duration_s = 0.0;
  double epoch_length_s = kDefaultEpochLengthS;
  double beacon_interval_s = 1.0;
  double matching_poll_interval_s = 300.0;
  double exposure_threshold_s = kDefaultExposureThresholdS;
  MatchingMode matching_mode = MatchingMode::kLocal;
  ChannelModel channel;
  DeviceConfig device_config;
  std::vector<AgentSpec> agents;

  double distance_between(std::size_t a, std::size_t b, double t_s) const {
    auto [ax, ay] = agents[a].position_at(t_s);
    auto [bx, by] = agents[b].position_at(t_s);
    return std::hypot(ax - bx, ay - by);
  }

  // Collects every violation before rejecting, so a bad file is fixed in one
  // round trip.
  std::vector<std::string> validation_errors() const {
    std::vector<std::string> errors;
    if (!(duration_s > 0.0)) errors.push_back("duration_s must be positive");
    if (!(epoch_length_s > 0.0)) errors.push_back("epoch_length_s must be positive");
    if (!(beacon_interval_s > 0.0)) errors.push_back("beacon_interval_s must be positive");
    if (!(matching_poll_interval_s > 0.0)) {
      errors.push_back("matching_poll_interval_s must be positive");
    }
    if (!(exposure_threshold_s > 0.0)) errors.push_back("exposure_threshold_s must be positive");
    if (!(channel.exponent_n > 0.0)) errors.push_back("channel.exponent_n must be positive");
    if (channel.shadowing_sigma_db < 0.0) {
      errors.push_back("channel.shadowing_sigma_db must be non-negative");
    }
    if (agents.empty()) errors.push_back("at least one agent is required");
    std::set<std::string> ids;
    for (const auto& agent : agents) {
      std::string who = "agent \"" + agent.id + "\"";
      if (agent.id.empty()) errors.push_back("agent ids must be non-empty");
      if (!ids.insert(agent.id).second) errors.push_back(who + ": duplicate id");
      if (agent.trajectory.empty()) {
        errors.push_back(who + ": trajectory needs at least one waypoint");
      }
      for (std::size_t i = 1; i < agent.trajectory.size(); ++i) {
        if (!(agent.trajectory[i].t_s > agent.trajectory[i - 1].t_s)) {
          errors.push_back(who + ": waypoint times must be strictly increasing (index " +
                           std::to_string(i) + ")");
        }
      }
      for (const auto& sample : agent.sensor_events) {
        if (sample.timestamp_s < 0.0 || sample.timestamp_s > duration_s) {
          errors.push_back(who + ": sensor event at t=" + std::to_string(sample.timestamp_s) +
                           " outside [0, duration_s]");
        }
      }
      if (agent.infected_from_s &&
          (*agent.infected_from_s < 0.0 || *agent.infected_from_s > duration_s)) {
        errors.push_back(who + ": infected_from_s outside [0, duration_s]");
      }
    }
    try {
      device_config.validate();
    } catch (const Error& e) {
      errors.push_back(std::string("device_config: ") + e.what());
    }
    return errors;
  }

  void validate() const {
    auto errors = validation_errors();
    if (!errors.empty()) {
      std::string joined;
      for (const auto& e : errors) {
        if (!joined.empty()) joined += "; ";
        joined += e;
      }
      throw Error(ErrorCode::kValidation, joined);
    }
  }

  static Scenario from_json(const nlohmann::json& j) {
    Scenario s;
    try {
      s.seed = j.value("seed", std::uint64_t{0});
      s.duration_s = j.at("duration_s").get<double>();
      s.epoch_length_s = j.value("epoch_length_s", kDefaultEpochLengthS);
      s.beacon_interval_s = j.value("beacon_interval_s", 1.0);
      s.matching_poll_interval_s = j.value("matching_poll_interval_s", 300.0);
      s.exposure_threshold_s = j.value("exposure_threshold_s", kDefaultExposureThresholdS);
      if (j.contains("matching_mode")) {
        std::string mode = j.at("matching_mode").get<std::string>();
        if (mode == "local") {
          s.matching_mode = MatchingMode::kLocal;
        } else if (mode == "cloud") {
          s.matching_mode = MatchingMode::kCloud;
        } else {
          throw Error(ErrorCode::kValidation,
                      "matching_mode must be \"local\" or \"cloud\", got \"" + mode + "\"");
        }
      }
      if (j.contains("channel")) {
        const auto& c = j.at("channel");
        s.channel.exponent_n = c.value("exponent_n", s.channel.exponent_n);
        s.channel.pl0_db = c.value("pl0_db", s.channel.pl0_db);
        s.channel.shadowing_sigma_db = c.value("shadowing_sigma_db", s.channel.shadowing_sigma_db);
        s.channel.reception_floor_dbm =
            c.value("reception_floor_dbm", s.channel.reception_floor_dbm);
      }
      DeviceConfig config;
      config.epoch_length_s = s.epoch_length_s;
      if (j.contains("device_config")) {
        config = DeviceState::config_from_json(j.at("device_config"), config);
      }
      s.device_config = config;
      // The device's view of epochs is authoritative; rotation events are
      // scheduled from the same value.
      s.epoch_length_s = config.epoch_length_s;
      for (const auto& a : j.at("agents")) {
        AgentSpec agent;
        agent.id = a.at("id").get<std::string>();
        for (const auto& w : a.at("trajectory")) {
          agent.trajectory.push_back(Waypoint{w.at("t_s").get<double>(),
                                              w.at("x_m").get<double>(),
                                              w.at("y_m").get<double>()});
        }
        for (const auto& e : a.value("sensor_events", nlohmann::json::array())) {
          SensorSample sample;
          sample.timestamp_s = e.at("t_s").get<double>();
          sample.temperature_c = e.value("temperature_c", sample.temperature_c);
          sample.spo2_pct = e.value("spo2_pct", sample.spo2_pct);
          sample.cough_event = e.value("cough", false);
          agent.sensor_events.push_back(sample);
        }
        if (a.contains("infected_from_s")) {
          agent.infected_from_s = a.at("infected_from_s").get<double>();
        }
        agent.consent = a.value("consent", true);
        s.agents.push_back(std::move(agent));
      }
    } catch (const Error&) {
      throw;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kValidation, std::string("bad scenario JSON: ") + e.what());
    }
    s.validate();
    return s;
  }
};

}  // namespace bracelet

#endif  // BRACELET_SCENARIO_HPP_
