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

// Discrete-event simulation of a bracelet fleet against an in-process tag
// service. The event loop is strictly ordered — (timestamp, kind rank, agent,
// sub, sequence) — and every random draw comes from a counter-derived
// substream of the scenario seed, so a scenario maps to one byte-exact report.

#ifndef BRACELET_SIM_HPP_
#define BRACELET_SIM_HPP_

#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "bracelet/cloud.hpp"
#include "bracelet/device.hpp"
#include "bracelet/matching.hpp"
#include "bracelet/protocol.hpp"
#include "bracelet/rng.hpp"
#include "bracelet/scenario.hpp"

#include "json.hpp"

namespace bracelet {

// rssi = tx − (pl0 + 10·n·log10(d)) + N(0, σ²); beacons under the reception
// floor are lost. σ=0 still consumes one draw so both matching modes see the
// same stream.
inline std::optional<double> channel_rssi(double distance_m, const ChannelModel& channel,
                                          double tx_power_dbm, SplitMix64& rng) {
  double d = std::max(distance_m, 1e-3);
  double loss = channel.pl0_db + 10.0 * channel.exponent_n * std::log10(d);
  double rssi = tx_power_dbm - loss + rng.gaussian(0.0, 1.0) * channel.shadowing_sigma_db;
  if (rssi < channel.reception_floor_dbm) {
    return std::nullopt;
  }
  return rssi;
}

struct SimEventCounts {
  std::uint64_t rotations = 0;
  std::uint64_t emissions = 0;
  std::uint64_t receptions = 0;
  std::uint64_t dropped_beacons = 0;
  std::uint64_t sensor_samples = 0;
  std::uint64_t rejected_samples = 0;
  std::uint64_t violation_alerts = 0;
  std::uint64_t counted_violations = 0;
  std::uint64_t uploads_accepted = 0;
  std::uint64_t uploads_suppressed = 0;
  std::uint64_t matching_polls = 0;
};

struct RiskTimelineEntry {
  double t_s = 0.0;
  std::string agent;
  RiskLevel risk = RiskLevel::kNoRisk;
};

struct ViolationEntry {
  double t_s = 0.0;
  std::string agent;
  std::string peer_tag_hex;
  double distance_m = 0.0;
};

struct DecisionEntry {
  double t_s = 0.0;
  std::string agent;
  ExposureDecision decision;
};

struct UploadEntry {
  double t_s = 0.0;
  std::string agent;
  std::string group_id_hex;
  std::uint64_t cursor = 0;
};

struct SimReport {
  std::string matching_mode;
  double duration_s = 0.0;
  std::vector<std::string> agents;
  SimEventCounts counts;
  std::vector<RiskTimelineEntry> risk_timeline;
  std::vector<ViolationEntry> violations;  // counted violations only
  std::vector<DecisionEntry> decisions;
  std::vector<UploadEntry> uploads;
  std::set<std::string> detected_pairs;               // "observer->uploader"
  std::map<std::string, double> ground_truth_exposure_s;  // same key shape
  double precision = 1.0;
  double recall = 1.0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["schema"] = "bracelet-sim-report/1";
    j["matching_mode"] = matching_mode;
    j["duration_s"] = duration_s;
    j["agents"] = agents;
    j["event_counts"] = {{"rotations", counts.rotations},
                         {"emissions", counts.emissions},
                         {"receptions", counts.receptions},
                         {"dropped_beacons", counts.dropped_beacons},
                         {"sensor_samples", counts.sensor_samples},
                         {"rejected_samples", counts.rejected_samples},
                         {"violation_alerts", counts.violation_alerts},
                         {"counted_violations", counts.counted_violations},
                         {"uploads_accepted", counts.uploads_accepted},
                         {"uploads_suppressed", counts.uploads_suppressed},
                         {"matching_polls", counts.matching_polls}};
    auto timeline = nlohmann::ordered_json::array();
    for (const auto& entry : risk_timeline) {
      timeline.push_back({{"t_s", entry.t_s},
                          {"agent", entry.agent},
                          {"risk", risk_level_name(entry.risk)}});
    }
    j["risk_timeline"] = std::move(timeline);
    auto violations_json = nlohmann::ordered_json::array();
    for (const auto& v : violations) {
      violations_json.push_back({{"t_s", v.t_s},
                                 {"agent", v.agent},
                                 {"peer_tag", v.peer_tag_hex},
                                 {"distance_m", v.distance_m}});
    }
    j["violations"] = std::move(violations_json);
    auto decisions_json = nlohmann::ordered_json::array();
    for (const auto& d : decisions) {
      decisions_json.push_back({{"t_s", d.t_s},
                                {"agent", d.agent},
                                {"positive", d.decision.positive},
                                {"matched_group_count", d.decision.matched_group_count},
                                {"max_group_exposure_s", d.decision.max_group_exposure_s}});
    }
    j["decisions"] = std::move(decisions_json);
    auto uploads_json = nlohmann::ordered_json::array();
    for (const auto& u : uploads) {
      uploads_json.push_back({{"t_s", u.t_s},
                              {"agent", u.agent},
                              {"group_id", u.group_id_hex},
                              {"cursor", u.cursor}});
    }
    j["uploads"] = std::move(uploads_json);
    j["detected_pairs"] = detected_pairs;
    j["ground_truth_exposure_s"] = ground_truth_exposure_s;
    j["precision"] = precision;
    j["recall"] = recall;
    return j;
  }

  std::string risk_timeline_csv() const {
    std::string csv = "t_s,agent,risk\n";
    for (const auto& entry : risk_timeline) {
      csv += std::to_string(entry.t_s) + "," + entry.agent + "," +
             risk_level_name(entry.risk) + "\n";
    }
    return csv;
  }
};

struct Score {
  double precision = 1.0;
  double recall = 1.0;
};

// Precision/recall of pair-level exposure detection against trajectory ground
// truth; both 1.0 when their denominator is empty.
inline Score score(const SimReport& report, const Scenario& scenario) {
  std::set<std::string> truth;
  for (const auto& [pair, exposure] : report.ground_truth_exposure_s) {
    if (exposure >= scenario.exposure_threshold_s) {
      truth.insert(pair);
    }
  }
  const auto& detected = report.detected_pairs;
  std::size_t hits = 0;
  for (const auto& pair : detected) {
    if (truth.count(pair) > 0) ++hits;
  }
  Score s;
  s.precision = detected.empty() ? 1.0 : static_cast<double>(hits) / detected.size();
  s.recall = truth.empty() ? 1.0 : static_cast<double>(hits) / truth.size();
  return s;
}

namespace detail {

enum class EventKind : int {
  kRotation = 0,
  kEmission = 1,
  kReception = 2,
  kSensor = 3,
  kInfection = 4,
  kMatching = 5,
};

struct SimEvent {
  double t = 0.0;
  int rank = 0;
  int agent = 0;     // receiver for receptions; -1 for fleet-wide events
  long sub = 0;      // emitter for receptions; insertion order otherwise
  long seq = 0;
  EventKind kind = EventKind::kRotation;
  int emitter = -1;
  BeaconFrame frame{};
  double distance_m = 0.0;
};

struct SimEventAfter {
  bool operator()(const SimEvent& a, const SimEvent& b) const {
    if (a.t != b.t) return a.t > b.t;
    if (a.rank != b.rank) return a.rank > b.rank;
    if (a.agent != b.agent) return a.agent > b.agent;
    if (a.sub != b.sub) return a.sub > b.sub;
    return a.seq > b.seq;
  }
};

}  // namespace detail

class Simulation {
 public:
  explicit Simulation(Scenario scenario) : scenario_(std::move(scenario)) {
    scenario_.validate();
  }

  SimReport run() {
    SplitMix64 root(scenario_.seed);
    SplitMix64 seed_stream = root.substream(1);
    shadowing_ = root.substream(2);
    service_.emplace(TagService::Options{std::nullopt, root.substream(3).next(),
                                         scenario_.exposure_threshold_s});

    const std::size_t n = scenario_.agents.size();
    devices_.clear();
    devices_.reserve(n);
    PathLossModel model{scenario_.channel.exponent_n, scenario_.channel.pl0_db, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      devices_.emplace_back(DeviceSeed::from_rng(seed_stream), scenario_.device_config,
                            model, scenario_.agents[i].consent);
    }
    fetch_cursors_.assign(n, 0);
    known_groups_.assign(n, {});
    uploaded_.assign(n, false);

    report_ = SimReport{};
    report_.matching_mode = matching_mode_name(scenario_.matching_mode);
    report_.duration_s = scenario_.duration_s;
    for (const auto& agent : scenario_.agents) {
      report_.agents.push_back(agent.id);
    }

    schedule_all();
    while (!queue_.empty()) {
      detail::SimEvent event = queue_.top();
      queue_.pop();
      dispatch(event);
    }

    compute_ground_truth();
    Score s = score(report_, scenario_);
    report_.precision = s.precision;
    report_.recall = s.recall;
    return report_;
  }

 private:
  using EventKind = detail::EventKind;

  void push(detail::SimEvent event) {
    event.seq = next_seq_++;
    queue_.push(event);
  }

  void schedule_all() {
    const double duration = scenario_.duration_s;
    for (std::uint64_t k = 0;; ++k) {
      double t = static_cast<double>(k) * scenario_.epoch_length_s;
      if (t > duration) break;
      push({t, static_cast<int>(EventKind::kRotation), -1, 0, 0, EventKind::kRotation});
    }
    for (std::size_t agent = 0; agent < scenario_.agents.size(); ++agent) {
      for (std::uint64_t k = 0;; ++k) {
        double t = static_cast<double>(k) * scenario_.beacon_interval_s;
        if (t >= duration) break;
        push({t, static_cast<int>(EventKind::kEmission), static_cast<int>(agent), 0, 0,
              EventKind::kEmission});
      }
      long sensor_order = 0;
      for (const auto& sample : scenario_.agents[agent].sensor_events) {
        push({sample.timestamp_s, static_cast<int>(EventKind::kSensor),
              static_cast<int>(agent), sensor_order++, 0, EventKind::kSensor});
      }
      if (scenario_.agents[agent].infected_from_s) {
        push({*scenario_.agents[agent].infected_from_s, static_cast<int>(EventKind::kInfection),
              static_cast<int>(agent), 0, 0, EventKind::kInfection});
      }
    }
    for (std::uint64_t k = 1;; ++k) {
      double t = static_cast<double>(k) * scenario_.matching_poll_interval_s;
      if (t >= duration) break;
      push({t, static_cast<int>(EventKind::kMatching), -1, 0, 0, EventKind::kMatching});
    }
    // Always close with a matching pass so the report reflects everything.
    push({duration, static_cast<int>(EventKind::kMatching), -1, 0, 0, EventKind::kMatching});
  }

  void dispatch(const detail::SimEvent& event) {
    switch (event.kind) {
      case EventKind::kRotation: {
        for (std::size_t agent = 0; agent < devices_.size(); ++agent) {
          if (devices_[agent].rotate_if_due(event.t)) {
            ++report_.counts.rotations;
          }
        }
        break;
      }
      case EventKind::kEmission:
        handle_emission(event.t, static_cast<std::size_t>(event.agent));
        break;
      case EventKind::kReception:
        handle_reception(event);
        break;
      case EventKind::kSensor:
        handle_sensor(event.t, static_cast<std::size_t>(event.agent),
                      static_cast<std::size_t>(event.sub));
        break;
      case EventKind::kInfection:
        handle_infection(event.t, static_cast<std::size_t>(event.agent));
        break;
      case EventKind::kMatching:
        handle_matching(event.t);
        break;
    }
  }

  void handle_emission(double t, std::size_t emitter) {
    ++report_.counts.emissions;
    BeaconFrame frame = encode_beacon(devices_[emitter].current_beacon());
    for (std::size_t receiver = 0; receiver < devices_.size(); ++receiver) {
      if (receiver == emitter) continue;
      detail::SimEvent reception;
      reception.t = t;
      reception.rank = static_cast<int>(EventKind::kReception);
      reception.agent = static_cast<int>(receiver);
      reception.sub = static_cast<long>(emitter);
      reception.kind = EventKind::kReception;
      reception.emitter = static_cast<int>(emitter);
      reception.frame = frame;
      reception.distance_m = scenario_.distance_between(emitter, receiver, t);
      push(reception);
    }
  }

  void handle_reception(const detail::SimEvent& event) {
    Beacon beacon = decode_beacon(event.frame);
    auto rssi = channel_rssi(event.distance_m, scenario_.channel,
                             static_cast<double>(beacon.tx_power_dbm), shadowing_);
    if (!rssi) {
      ++report_.counts.dropped_beacons;
      return;
    }
    ++report_.counts.receptions;
    auto effects =
        devices_[static_cast<std::size_t>(event.agent)].on_beacon(beacon, *rssi, event.t);
    process_effects(static_cast<std::size_t>(event.agent), event.t, effects);
  }

  void handle_sensor(double t, std::size_t agent, std::size_t sensor_index) {
    const auto& sample = scenario_.agents[agent].sensor_events[sensor_index];
    ++report_.counts.sensor_samples;
    try {
      devices_[agent].on_sensor_sample(sample, t);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kRejectedSample) throw;
      ++report_.counts.rejected_samples;
      return;
    }
    process_effects(agent, t, devices_[agent].evaluate_risk(t));
  }

  void handle_infection(double t, std::size_t agent) {
    process_effects(agent, t, devices_[agent].mark_infected(t));
  }

  void handle_matching(double t) {
    ++report_.counts.matching_polls;
    for (std::size_t agent = 0; agent < devices_.size(); ++agent) {
      auto contacts = devices_[agent].contact_exposures();
      ExposureDecision decision;
      if (scenario_.matching_mode == MatchingMode::kLocal) {
        refresh_known_groups(agent);
        decision = local_match(known_groups_[agent], contacts, scenario_.exposure_threshold_s);
      } else {
        nlohmann::ordered_json contacts_json = nlohmann::ordered_json::array();
        for (const auto& c : contacts) {
          contacts_json.push_back({{"tag", c.tag.hex()}, {"exposure_s", c.exposure_s}});
        }
        nlohmann::ordered_json body{{"contacts", std::move(contacts_json)},
                                    {"threshold_s", scenario_.exposure_threshold_s}};
        auto response = service_->handle_check(body);
        decision.positive = response.at("positive").get<bool>();
        decision.matched_group_count = response.at("matched_group_count").get<int>();
        decision.max_group_exposure_s = response.at("max_group_exposure_s").get<double>();
      }
      report_.decisions.push_back({t, scenario_.agents[agent].id, decision});
      record_detected_pairs(agent, contacts);
      process_effects(agent, t, devices_[agent].apply_exposure_decision(decision, t));
    }
  }

  // Local mode accumulates the published groups exactly as a device would:
  // fetch everything after the last seen cursor, then match on-device.
  void refresh_known_groups(std::size_t agent) {
    auto response = service_->handle_fetch(fetch_cursors_[agent]);
    for (const auto& group_json : response.at("groups")) {
      CaseGroup group;
      group.group_id = GroupId::from_hex(group_json.at("group_id").get<std::string>());
      group.cursor = group_json.at("cursor").get<std::uint64_t>();
      for (const auto& hex : group_json.at("tags")) {
        group.tags.push_back(Tag::from_hex(hex.get<std::string>()));
      }
      known_groups_[agent].push_back(std::move(group));
    }
    fetch_cursors_[agent] = response.at("cursor").get<std::uint64_t>();
  }

  void record_detected_pairs(std::size_t agent, const std::vector<TagExposure>& contacts) {
    auto snapshot = service_->groups_snapshot();
    for (const auto& [group_id, exposure] : group_exposures(snapshot, contacts)) {
      if (exposure >= scenario_.exposure_threshold_s) {
        auto uploader = group_uploader_.find(group_id);
        if (uploader != group_uploader_.end()) {
          report_.detected_pairs.insert(scenario_.agents[agent].id + "->" +
                                        scenario_.agents[uploader->second].id);
        }
      }
    }
  }

  void process_effects(std::size_t agent, double t, const std::vector<Effect>& effects) {
    for (const auto& effect : effects) {
      if (const auto* alert = std::get_if<ViolationAlert>(&effect)) {
        ++report_.counts.violation_alerts;
        if (alert->counted) {
          ++report_.counts.counted_violations;
          report_.violations.push_back(
              {t, scenario_.agents[agent].id, alert->tag.hex(), alert->distance_m});
        }
      } else if (const auto* risk = std::get_if<RiskChanged>(&effect)) {
        report_.risk_timeline.push_back({t, scenario_.agents[agent].id, risk->to});
      } else if (const auto* upload = std::get_if<UploadReady>(&effect)) {
        handle_upload(agent, t, upload->bundle);
      }
    }
  }

  void handle_upload(std::size_t agent, double t, const UploadBundle& bundle) {
    if (uploaded_[agent]) {
      // A device uploads once per diagnosis; a grown bundle would collide
      // with its own earlier case group.
      ++report_.counts.uploads_suppressed;
      return;
    }
    auto response = service_->handle_upload(bundle.to_json());
    uploaded_[agent] = true;
    ++report_.counts.uploads_accepted;
    GroupId group_id = GroupId::from_hex(response.at("group_id").get<std::string>());
    group_uploader_[group_id] = agent;
    report_.uploads.push_back({t, scenario_.agents[agent].id,
                               response.at("group_id").get<std::string>(),
                               response.at("cursor").get<std::uint64_t>()});
  }

  // True co-proximity seconds per ordered (observer, uploader) pair, sampled
  // at 1 s; the detectable population is exactly the agents whose upload was
  // accepted.
  void compute_ground_truth() {
    for (std::size_t b = 0; b < devices_.size(); ++b) {
      if (!uploaded_[b]) continue;
      for (std::size_t a = 0; a < devices_.size(); ++a) {
        if (a == b) continue;
        double exposure = 0.0;
        for (double t = 0.0; t < scenario_.duration_s; t += 1.0) {
          if (scenario_.distance_between(a, b, t) <=
              scenario_.device_config.violation_threshold_m) {
            exposure += 1.0;
          }
        }
        report_.ground_truth_exposure_s[scenario_.agents[a].id + "->" +
                                        scenario_.agents[b].id] = exposure;
      }
    }
  }

  Scenario scenario_;
  std::vector<DeviceState> devices_;
  std::optional<TagService> service_;
  SplitMix64 shadowing_{0};
  std::priority_queue<detail::SimEvent, std::vector<detail::SimEvent>, detail::SimEventAfter>
      queue_;
  long next_seq_ = 0;
  std::vector<std::uint64_t> fetch_cursors_;
  std::vector<std::vector<CaseGroup>> known_groups_;
  std::vector<bool> uploaded_;
  std::map<GroupId, std::size_t> group_uploader_;
  SimReport report_;
};

inline SimReport run(const Scenario& scenario) { return Simulation(scenario).run(); }

}  // namespace bracelet

#endif  // BRACELET_SIM_HPP_
